// The tokenized peer-review page: show the full session, take a verdict.
// The token in the URL is the only credential.

import { ApiError, getValidation, postVerdict } from './api.js';
import { escapeHtml } from './format.js';
import { renderSessionDetail } from './session.js';
import type { Assignment, ValidationDetail } from './types.js';

export function renderReviewForm(detail: ValidationDetail): string {
  const a = detail.assignment;
  const session = detail.session ? renderSessionDetail(detail.session) : '';
  return `
  <section class="validate">
    <h2>validate this session</h2>
    <p>${escapeHtml(a.validator)}, please review ${escapeHtml(a.session_author)}&rsquo;s
       session below and mark it collectively.</p>
    ${session}
    <form id="verdict-form" class="verdict-form">
      <label><input type="radio" name="verdict" value="valid" required> valid</label>
      <label><input type="radio" name="verdict" value="invalid"> invalid</label>
      <textarea id="comment" name="comment" maxlength="2000"
                placeholder="optional comment"></textarea>
      <button type="submit">record verdict</button>
      <p id="verdict-error" class="error hidden"></p>
    </form>
  </section>`;
}

export function renderDecided(assignment: Assignment, note = 'already decided'): string {
  const comment = assignment.comment
    ? `<p>comment: &ldquo;${escapeHtml(assignment.comment)}&rdquo;</p>`
    : '';
  return `
  <section class="validate">
    <h2>${escapeHtml(note)}</h2>
    <p>session <code>${escapeHtml(assignment.session_id)}</code> was marked
       <span class="badge badge-${assignment.verdict}">${assignment.verdict}</span>
       by ${escapeHtml(assignment.validator)}.</p>
    ${comment}
    <p><a href="/">&larr; back to the feed</a></p>
  </section>`;
}

export function renderTokenNotFound(): string {
  return `<section class="validate"><h2>unknown validation link</h2>
  <p>this token does not match any assignment; it may have been mistyped.</p></section>`;
}

export async function mountValidationPage(doc: Document, token: string): Promise<void> {
  const root = doc.getElementById('app')!;
  let detail: ValidationDetail;
  try {
    detail = await getValidation(token);
  } catch (err) {
    root.innerHTML = err instanceof ApiError && err.status === 404
      ? renderTokenNotFound()
      : `<p class="error">could not load the review (${escapeHtml(String(err))})</p>`;
    return;
  }
  if (detail.assignment.verdict) {
    root.innerHTML = renderDecided(detail.assignment);
    return;
  }
  root.innerHTML = renderReviewForm(detail);
  const form = doc.getElementById('verdict-form') as HTMLFormElement;
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const verdict = data.get('verdict') as 'valid' | 'invalid';
    const comment = (data.get('comment') as string).trim() || undefined;
    void postVerdict(token, verdict, comment)
      .then((assignment) => {
        root.innerHTML = renderDecided(assignment, 'verdict recorded');
      })
      .catch(async (err) => {
        if (err instanceof ApiError && err.status === 409) {
          const latest = await getValidation(token);
          root.innerHTML = renderDecided(latest.assignment);
          return;
        }
        const box = doc.getElementById('verdict-error')!;
        box.textContent = String(err);
        box.classList.remove('hidden');
      });
  });
}
