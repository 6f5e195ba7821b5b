// Entry point: route by pathname and mount the page.
import { ApiError, getSession } from './api.js';
import { FeedController, renderFeedShell } from './feed.js';
import { renderSessionDetail, renderSessionNotFound } from './session.js';
import { mountValidationPage } from './validate.js';
async function mountSessionPage(doc, id) {
    const root = doc.getElementById('app');
    try {
        root.innerHTML = renderSessionDetail(await getSession(id));
    }
    catch (err) {
        root.innerHTML = err instanceof ApiError && err.status === 404
            ? renderSessionNotFound(id)
            : `<p class="error">could not load the session</p>`;
    }
}
function mountFeedPage(doc) {
    const author = new URLSearchParams(doc.defaultView.location.search).get('author') ?? '';
    doc.getElementById('app').innerHTML = renderFeedShell(author);
    new FeedController(doc, author).start();
}
export function route(doc) {
    const path = doc.defaultView.location.pathname;
    const session = path.match(/^\/session\/([^/]+)$/);
    const validate = path.match(/^\/validate\/([^/]+)$/);
    if (session) {
        void mountSessionPage(doc, decodeURIComponent(session[1]));
    }
    else if (validate) {
        void mountValidationPage(doc, decodeURIComponent(validate[1]));
    }
    else {
        mountFeedPage(doc);
    }
}
route(document);
