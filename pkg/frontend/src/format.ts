// Text helpers: everything rendered into HTML goes through escapeHtml first;
// linkify runs on already-escaped text, so its regex never sees raw markup.

const URL_RE = /https?:\/\/[^\s<>"']+/g;

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

export function linkify(text: string): string {
  return escapeHtml(text).replace(
    URL_RE,
    (url) => `<a href="${url}" target="_blank" rel="noopener noreferrer">${url}</a>`,
  );
}

// "28/05/2013 12:06" in the viewer's local timezone; pair it with the ISO
// timestamp as a hover title.
export function formatDisplayTs(iso: string): string {
  const d = new Date(iso);
  const pad = (n: number) => String(n).padStart(2, '0');
  return (
    `${pad(d.getDate())}/${pad(d.getMonth() + 1)}/${d.getFullYear()} ` +
    `${pad(d.getHours())}:${pad(d.getMinutes())}`
  );
}

export function formatDuration(totalSeconds: number): string {
  const h = Math.floor(totalSeconds / 3600);
  const m = Math.round((totalSeconds % 3600) / 60);
  if (h === 0) return `${m}m`;
  return `${h}h${pad2(m)}m`;
}

function pad2(n: number): string {
  return String(n).padStart(2, '0');
}
