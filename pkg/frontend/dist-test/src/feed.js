// The feed page: Data / Nick / Log rows in exactly the API's order, a nick
// filter, cursor-driven "load more", and live updates (event stream with a
// polling fallback).
import { getFeed } from './api.js';
import { escapeHtml, formatDisplayTs, linkify } from './format.js';
export const POLL_INTERVAL_MS = 30_000;
export function renderFeedRow(entry) {
    return (`<tr>` +
        `<td class="ts" title="${escapeHtml(entry.client_ts)}">` +
        `${formatDisplayTs(entry.client_ts)}</td>` +
        `<td class="nick"><a href="/?author=${encodeURIComponent(entry.author)}">` +
        `${escapeHtml(entry.author)}</a></td>` +
        `<td class="log"><span class="prefix">shout</span> ${linkify(entry.text)} ` +
        `<a class="session-link" href="/session/${encodeURIComponent(entry.session_id)}">#</a></td>` +
        `</tr>`);
}
export function renderFeedRows(entries) {
    // no client-side reordering: the API's order is the feed's order
    return entries.map(renderFeedRow).join('\n');
}
export function renderFeedShell(author) {
    return `
  <section class="feed">
    <form id="filter-form" class="filter">
      <input id="filter-nick" name="author" placeholder="filter by nick"
             value="${escapeHtml(author)}">
      <button type="submit">filter</button>
      <span id="live-state" class="live-state"></span>
    </form>
    <div id="stale-banner" class="banner hidden">server unreachable, showing the last loaded page</div>
    <table class="feed-table">
      <thead><tr><th>Data</th><th>Nick</th><th>Log</th></tr></thead>
      <tbody id="feed-body"></tbody>
    </table>
    <button id="more" class="more hidden">more</button>
  </section>`;
}
export class FeedController {
    doc;
    author;
    entries = [];
    cursor = null;
    topId = 0;
    pollTimer;
    constructor(doc, author) {
        this.doc = doc;
        this.author = author;
    }
    body() {
        return this.doc.getElementById('feed-body');
    }
    setStale(stale) {
        this.doc.getElementById('stale-banner').classList.toggle('hidden', !stale);
    }
    setLiveState(text) {
        this.doc.getElementById('live-state').textContent = text;
    }
    renderAll() {
        this.body().innerHTML = renderFeedRows(this.entries);
        this.doc.getElementById('more').classList.toggle('hidden', this.cursor === null);
    }
    async loadFirstPage() {
        try {
            const page = await getFeed({ author: this.author || undefined });
            this.entries = page.entries;
            this.cursor = page.next_cursor;
            this.topId = page.entries[0]?.id ?? 0;
            this.setStale(false);
            this.renderAll();
        }
        catch {
            this.setStale(true);
        }
    }
    async loadMore() {
        if (this.cursor === null)
            return;
        try {
            const page = await getFeed({ author: this.author || undefined, cursor: this.cursor });
            this.entries = this.entries.concat(page.entries);
            this.cursor = page.next_cursor;
            this.setStale(false);
            this.renderAll();
        }
        catch {
            this.setStale(true);
        }
    }
    // Poll responses older than what is already shown are discarded: the top
    // id only moves forward.
    async poll() {
        try {
            const page = await getFeed({ author: this.author || undefined });
            const fresh = page.entries.filter((e) => e.id > this.topId);
            if (fresh.length > 0) {
                this.entries = fresh.concat(this.entries);
                this.topId = fresh[0].id;
            }
            this.setStale(false);
            this.renderAll();
        }
        catch {
            this.setStale(true);
        }
    }
    acceptLive(entry) {
        if (entry.id <= this.topId)
            return;
        if (this.author && entry.author !== this.author)
            return;
        this.entries = [entry, ...this.entries];
        this.topId = entry.id;
        this.setStale(false);
        this.renderAll();
    }
    start() {
        void this.loadFirstPage();
        this.doc.getElementById('more').addEventListener('click', () => void this.loadMore());
        const win = this.doc.defaultView;
        win.addEventListener('scroll', () => {
            const nearBottom = win.innerHeight + win.scrollY >= this.doc.body.offsetHeight - 200;
            if (nearBottom)
                void this.loadMore();
        });
        if ('EventSource' in win) {
            const stream = new win.EventSource('/api/feed/stream');
            stream.addEventListener('shout', (event) => {
                this.acceptLive(JSON.parse(event.data));
            });
            stream.onopen = () => this.setLiveState('live');
            stream.onerror = () => this.setLiveState('polling');
        }
        else {
            this.setLiveState('polling');
        }
        this.pollTimer = win.setInterval(() => void this.poll(), POLL_INTERVAL_MS);
    }
    stop() {
        if (this.pollTimer !== undefined) {
            this.doc.defaultView.clearInterval(this.pollTimer);
        }
    }
}
