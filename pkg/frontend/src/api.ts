// Thin typed client over the documented HTTP API. Every page renders only
// what these calls return.

import type { FeedPage, SessionDetail, SessionSummary, ValidationDetail } from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail || code);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, body.error ?? 'error', body.detail ?? '');
  }
  return body as T;
}

export interface FeedQuery {
  author?: string;
  since?: string;
  limit?: number;
  cursor?: string;
}

export function getFeed(query: FeedQuery = {}, base = ''): Promise<FeedPage> {
  const params = new URLSearchParams();
  if (query.author) params.set('author', query.author);
  if (query.since) params.set('since', query.since);
  if (query.limit) params.set('limit', String(query.limit));
  if (query.cursor) params.set('cursor', query.cursor);
  const qs = params.toString();
  return request<FeedPage>(`${base}/api/feed${qs ? `?${qs}` : ''}`);
}

export function getSessions(
  opts: { author?: string; from?: string; to?: string } = {},
  base = '',
): Promise<SessionSummary[]> {
  const params = new URLSearchParams();
  if (opts.author) params.set('author', opts.author);
  if (opts.from) params.set('from', opts.from);
  if (opts.to) params.set('to', opts.to);
  const qs = params.toString();
  return request<SessionSummary[]>(`${base}/api/sessions${qs ? `?${qs}` : ''}`);
}

export function getSession(id: string, base = ''): Promise<SessionDetail> {
  return request<SessionDetail>(`${base}/api/sessions/${encodeURIComponent(id)}`);
}

export function getValidation(token: string, base = ''): Promise<ValidationDetail> {
  return request<ValidationDetail>(`${base}/api/validations/${encodeURIComponent(token)}`);
}

export function postVerdict(
  token: string,
  verdict: 'valid' | 'invalid',
  comment: string | undefined,
  base = '',
): Promise<ValidationDetail['assignment']> {
  return request(`${base}/api/validations/${encodeURIComponent(token)}`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(comment ? { verdict, comment } : { verdict }),
  });
}
