import assert from 'node:assert/strict';
import { test } from 'node:test';
import { renderFeedRows, renderFeedShell } from '../src/feed.js';
import { renderSessionDetail, renderValidationBadge } from '../src/session.js';
import { renderDecided, renderReviewForm, renderTokenNotFound } from '../src/validate.js';
function entry(id, author, clientTs, text) {
    return {
        id,
        author,
        text,
        client_ts: clientTs,
        server_ts: '2026-01-01T00:00:00Z',
        session_id: `sess-${id}`,
    };
}
const SESSION = {
    session_id: 'abc',
    author: 'v1z',
    shout_count: 2,
    started_at: '2013-05-27T00:14:00Z',
    ended_at: '2013-05-27T02:49:00Z',
    duration_s: 9300,
    screencast_url: null,
    validation_state: 'pending',
    shouts: [
        { id: 1, text: 'investigando pq sprite ta borrada', client_ts: '2013-05-27T00:14:00Z',
            server_ts: '2013-05-27T00:14:00Z', origin: 'cli' },
        { id: 2, text: 'video em https://vimeo.com/pet-0-3-1', client_ts: '2013-05-27T02:49:00Z',
            server_ts: '2013-05-27T02:49:00Z', origin: 'cli' },
    ],
    mean_intershout_gap_s: 9300,
    validated_by: null,
    validation_comment: null,
};
test('feed rows keep the API order and the DD/MM/YYYY date format', () => {
    const html = renderFeedRows([
        entry(3, 'hybrid', '2013-05-28T12:06:00Z', 'respondidos os interessados'),
        entry(2, 'filter0', '2013-05-28T03:25:00Z', 'aprendendo relatividade geral'),
    ]);
    const first = html.indexOf('hybrid');
    const second = html.indexOf('filter0');
    assert.ok(first >= 0 && second > first, 'rows rendered in the given order');
    assert.ok(html.includes('28/05/2013 12:06'));
    assert.ok(html.includes('title="2013-05-28T12:06:00Z"'));
});
test('shout markup renders literally', () => {
    const html = renderFeedRows([entry(1, 'v1z', '2013-05-27T00:14:00Z', '<script>alert("xss")</script> <img src=x onerror=1>')]);
    assert.ok(!html.includes('<script>'));
    assert.ok(!html.includes('<img'));
    assert.ok(html.includes('&lt;script&gt;'));
});
test('shout URLs become links', () => {
    const html = renderFeedRows([entry(1, 'v1z', '2013-05-27T02:49:00Z', 'video da ultima versao em https://vimeo.com/pet-0-3-1')]);
    assert.ok(html.includes('<a href="https://vimeo.com/pet-0-3-1"'));
});
test('feed shell carries the filter box and stale banner', () => {
    const html = renderFeedShell('filter0');
    assert.ok(html.includes('id="filter-nick"'));
    assert.ok(html.includes('value="filter0"'));
    assert.ok(html.includes('id="stale-banner"'));
    assert.ok(html.includes('<th>Data</th><th>Nick</th><th>Log</th>'));
});
test('session detail shows duration, rows, and no badge decorations when pending', () => {
    const html = renderSessionDetail(SESSION);
    assert.ok(html.includes('2h35m'));
    assert.ok(html.includes('badge-pending'));
    assert.ok(!html.includes('screencast:'));
    assert.ok(html.includes('<a href="https://vimeo.com/pet-0-3-1"'));
});
test('invalid badge carries the validator comment', () => {
    const html = renderValidationBadge({
        ...SESSION,
        validation_state: 'invalid',
        validated_by: 'hybrid',
        validation_comment: 'sem screencast <aqui>',
    });
    assert.ok(html.includes('badge-invalid'));
    assert.ok(html.includes('hybrid'));
    assert.ok(html.includes('&lt;aqui&gt;'));
});
test('screencast link rendered when present', () => {
    const html = renderSessionDetail({ ...SESSION, screencast_url: 'https://vimeo.com/pet-0-3-1' });
    assert.ok(html.includes('screencast:'));
});
const ASSIGNMENT = {
    token: 't0k',
    session_id: 'abc',
    session_author: 'v1z',
    validator: 'hybrid',
    assigned_at: '2013-05-28T00:00:00Z',
    verdict: null,
    comment: null,
    decided_at: null,
};
test('review form renders radios, comment box and the session', () => {
    const html = renderReviewForm({ assignment: ASSIGNMENT, session: SESSION });
    assert.ok(html.includes('value="valid"'));
    assert.ok(html.includes('value="invalid"'));
    assert.ok(html.includes('maxlength="2000"'));
    assert.ok(html.includes('investigando pq sprite ta borrada'));
});
test('decided view shows the recorded verdict', () => {
    const html = renderDecided({ ...ASSIGNMENT, verdict: 'valid', comment: 'bom <b>x</b>' });
    assert.ok(html.includes('badge-valid'));
    assert.ok(html.includes('&lt;b&gt;'));
    assert.ok(renderTokenNotFound().includes('unknown validation link'));
});
