// Session detail: ordered shouts, duration, validation badge, screencast link.

import { escapeHtml, formatDisplayTs, formatDuration, linkify } from './format.js';
import type { SessionDetail } from './types.js';

export function renderValidationBadge(session: SessionDetail): string {
  const state = session.validation_state;
  let badge = `<span class="badge badge-${state}">${state}</span>`;
  if (state === 'invalid' && session.validation_comment) {
    badge += ` <span class="validator-comment">${escapeHtml(session.validated_by ?? '')}: ` +
      `&ldquo;${escapeHtml(session.validation_comment)}&rdquo;</span>`;
  }
  return badge;
}

export function renderSessionDetail(session: SessionDetail): string {
  const screencast = session.screencast_url
    ? `<p class="screencast">screencast: ${linkify(session.screencast_url)}</p>`
    : '';
  const rows = session.shouts
    .map(
      (shout) =>
        `<tr><td class="ts" title="${escapeHtml(shout.client_ts)}">` +
        `${formatDisplayTs(shout.client_ts)}</td>` +
        `<td class="log">${linkify(shout.text)}</td></tr>`,
    )
    .join('\n');
  return `
  <section class="session">
    <h2>session by ${escapeHtml(session.author)}</h2>
    <p class="meta">
      ${formatDisplayTs(session.started_at)} &ndash; ${formatDisplayTs(session.ended_at)}
      &middot; ${formatDuration(session.duration_s)}
      &middot; ${session.shout_count} shouts
      &middot; ${renderValidationBadge(session)}
    </p>
    ${screencast}
    <table class="feed-table">
      <thead><tr><th>Data</th><th>Log</th></tr></thead>
      <tbody>${rows}</tbody>
    </table>
    <p><a href="/">&larr; back to the feed</a></p>
  </section>`;
}

export function renderSessionNotFound(id: string): string {
  return `<section class="session"><h2>unknown session</h2>
  <p>nothing recorded under <code>${escapeHtml(id)}</code>.</p>
  <p><a href="/">&larr; back to the feed</a></p></section>`;
}
