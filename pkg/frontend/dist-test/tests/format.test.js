import assert from 'node:assert/strict';
import { test } from 'node:test';
import { escapeHtml, formatDisplayTs, formatDuration, linkify } from '../src/format.js';
test('escapeHtml neutralizes markup', () => {
    assert.equal(escapeHtml(`<script>alert("x")</script> & 'quotes'`), '&lt;script&gt;alert(&quot;x&quot;)&lt;/script&gt; &amp; &#39;quotes&#39;');
});
test('linkify wraps URLs and escapes everything else', () => {
    const out = linkify('video da ultima versao em https://vimeo.com/pet-0-3-1');
    assert.ok(out.includes('<a href="https://vimeo.com/pet-0-3-1"'));
    assert.ok(out.includes('>https://vimeo.com/pet-0-3-1</a>'));
    const sneaky = linkify('<b>bold?</b> http://x.example/a?b=1&c=2');
    assert.ok(!sneaky.includes('<b>'));
    assert.ok(sneaky.includes('&lt;b&gt;'));
    assert.ok(sneaky.includes('href="http://x.example/a?b=1&amp;c=2"'));
});
test('linkify leaves plain text alone apart from escaping', () => {
    assert.equal(linkify('pet 0.3.1 solto'), 'pet 0.3.1 solto');
});
test('formatDisplayTs renders DD/MM/YYYY HH:MM in local time', () => {
    // the suite runs with TZ=UTC, so local time equals the stored instant
    assert.equal(formatDisplayTs('2013-05-28T12:06:00Z'), '28/05/2013 12:06');
    assert.equal(formatDisplayTs('2013-05-27T02:49:00Z'), '27/05/2013 02:49');
});
test('formatDuration', () => {
    assert.equal(formatDuration(9300), '2h35m');
    assert.equal(formatDuration(900), '15m');
    assert.equal(formatDuration(0), '0m');
});
