// Thin typed client over the documented HTTP API. Every page renders only
// what these calls return.
export class ApiError extends Error {
    status;
    code;
    constructor(status, code, detail) {
        super(detail || code);
        this.status = status;
        this.code = code;
    }
}
async function request(url, init) {
    const resp = await fetch(url, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
        throw new ApiError(resp.status, body.error ?? 'error', body.detail ?? '');
    }
    return body;
}
export function getFeed(query = {}, base = '') {
    const params = new URLSearchParams();
    if (query.author)
        params.set('author', query.author);
    if (query.since)
        params.set('since', query.since);
    if (query.limit)
        params.set('limit', String(query.limit));
    if (query.cursor)
        params.set('cursor', query.cursor);
    const qs = params.toString();
    return request(`${base}/api/feed${qs ? `?${qs}` : ''}`);
}
export function getSessions(opts = {}, base = '') {
    const params = new URLSearchParams();
    if (opts.author)
        params.set('author', opts.author);
    if (opts.from)
        params.set('from', opts.from);
    if (opts.to)
        params.set('to', opts.to);
    const qs = params.toString();
    return request(`${base}/api/sessions${qs ? `?${qs}` : ''}`);
}
export function getSession(id, base = '') {
    return request(`${base}/api/sessions/${encodeURIComponent(id)}`);
}
export function getValidation(token, base = '') {
    return request(`${base}/api/validations/${encodeURIComponent(token)}`);
}
export function postVerdict(token, verdict, comment, base = '') {
    return request(`${base}/api/validations/${encodeURIComponent(token)}`, {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify(comment ? { verdict, comment } : { verdict }),
    });
}
