// The feed page: Data / Nick / Log rows in exactly the API's order, a nick
// filter, cursor-driven "load more", and live updates (event stream with a
// polling fallback).

import { getFeed } from './api.js';
import { escapeHtml, formatDisplayTs, linkify } from './format.js';
import type { FeedEntry } from './types.js';

export const POLL_INTERVAL_MS = 30_000;

export function renderFeedRow(entry: FeedEntry): string {
  return (
    `<tr>` +
    `<td class="ts" title="${escapeHtml(entry.client_ts)}">` +
    `${formatDisplayTs(entry.client_ts)}</td>` +
    `<td class="nick"><a href="/?author=${encodeURIComponent(entry.author)}">` +
    `${escapeHtml(entry.author)}</a></td>` +
    `<td class="log"><span class="prefix">shout</span> ${linkify(entry.text)} ` +
    `<a class="session-link" href="/session/${encodeURIComponent(entry.session_id)}">#</a></td>` +
    `</tr>`
  );
}

export function renderFeedRows(entries: FeedEntry[]): string {
  // no client-side reordering: the API's order is the feed's order
  return entries.map(renderFeedRow).join('\n');
}

export function renderFeedShell(author: string): string {
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
  private entries: FeedEntry[] = [];
  private cursor: string | null = null;
  private topId = 0;
  private pollTimer: number | undefined;

  constructor(
    private readonly doc: Document,
    private readonly author: string,
  ) {}

  private body(): HTMLElement {
    return this.doc.getElementById('feed-body')!;
  }

  private setStale(stale: boolean): void {
    this.doc.getElementById('stale-banner')!.classList.toggle('hidden', !stale);
  }

  private setLiveState(text: string): void {
    this.doc.getElementById('live-state')!.textContent = text;
  }

  private renderAll(): void {
    this.body().innerHTML = renderFeedRows(this.entries);
    this.doc.getElementById('more')!.classList.toggle('hidden', this.cursor === null);
  }

  async loadFirstPage(): Promise<void> {
    try {
      const page = await getFeed({ author: this.author || undefined });
      this.entries = page.entries;
      this.cursor = page.next_cursor;
      this.topId = page.entries[0]?.id ?? 0;
      this.setStale(false);
      this.renderAll();
    } catch {
      this.setStale(true);
    }
  }

  async loadMore(): Promise<void> {
    if (this.cursor === null) return;
    try {
      const page = await getFeed({ author: this.author || undefined, cursor: this.cursor });
      this.entries = this.entries.concat(page.entries);
      this.cursor = page.next_cursor;
      this.setStale(false);
      this.renderAll();
    } catch {
      this.setStale(true);
    }
  }

  // Poll responses older than what is already shown are discarded: the top
  // id only moves forward.
  async poll(): Promise<void> {
    try {
      const page = await getFeed({ author: this.author || undefined });
      const fresh = page.entries.filter((e) => e.id > this.topId);
      if (fresh.length > 0) {
        this.entries = fresh.concat(this.entries);
        this.topId = fresh[0]!.id;
      }
      this.setStale(false);
      this.renderAll();
    } catch {
      this.setStale(true);
    }
  }

  private acceptLive(entry: FeedEntry): void {
    if (entry.id <= this.topId) return;
    if (this.author && entry.author !== this.author) return;
    this.entries = [entry, ...this.entries];
    this.topId = entry.id;
    this.setStale(false);
    this.renderAll();
  }

  start(): void {
    void this.loadFirstPage();
    this.doc.getElementById('more')!.addEventListener('click', () => void this.loadMore());

    const win = this.doc.defaultView!;
    win.addEventListener('scroll', () => {
      const nearBottom =
        win.innerHeight + win.scrollY >= this.doc.body.offsetHeight - 200;
      if (nearBottom) void this.loadMore();
    });

    if ('EventSource' in win) {
      const stream = new win.EventSource('/api/feed/stream');
      stream.addEventListener('shout', (event) => {
        this.acceptLive(JSON.parse((event as MessageEvent).data) as FeedEntry);
      });
      stream.onopen = () => this.setLiveState('live');
      stream.onerror = () => this.setLiveState('polling');
    } else {
      this.setLiveState('polling');
    }
    this.pollTimer = win.setInterval(() => void this.poll(), POLL_INTERVAL_MS);
  }

  stop(): void {
    if (this.pollTimer !== undefined) {
      this.doc.defaultView!.clearInterval(this.pollTimer);
    }
  }
}
