// End-to-end against a real server: seed the 2013 corpus over HTTP, then
// drive the same API client and render functions the pages use.

import assert from 'node:assert/strict';
import { execFileSync, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';
import { after, before, test } from 'node:test';

import { ApiError, getFeed, getSession, getSessions, getValidation, postVerdict } from '../src/api.js';
import { renderFeedRows } from '../src/feed.js';
import { renderSessionDetail } from '../src/session.js';
import { renderDecided, renderReviewForm } from '../src/validate.js';

const PYTHON = process.env.PYTHON ?? 'python3';
const NICKS = ['hybrid', 'filter0', 'v1z', 'aut0mata'] as const;
const tokenFor = (nick: string) => `${nick}-token-0123456789abcdef`;

// author, client_ts, text; oldest is ingested first
const FIXTURE: Array<[string, string, string]> = [
  ['v1z', '2013-05-26T23:41:00Z',
   'git commit -am eliminated stupid lists and using references directly now for the'],
  ['v1z', '2013-05-26T23:56:00Z',
   'git commit -am da bala de licor - vomitando q nem doido - volta ao normal'],
  ['v1z', '2013-05-27T00:14:00Z', 'investigando pq sprite ta borrada'],
  ['v1z', '2013-05-27T01:06:00Z',
   'git commit in /Users/rfabbri/pet/pet: pingo vomitando sem borramento agora blz'],
  ['v1z', '2013-05-27T01:42:00Z',
   'git commit in /Users/rfabbri/pet/pet: dois estagios de animacao de bebado, implementado com classes separadas'],
  ['v1z', '2013-05-27T02:08:00Z', 'git commit in /Users/rfabbri/pet/pet: displaying hour'],
  ['v1z', '2013-05-27T02:18:00Z', 'git commit in /Users/rfabbri/pet/pet: sprite do coma alcoolico'],
  ['v1z', '2013-05-27T02:48:00Z', 'pet 0.3.1 solto'],
  ['v1z', '2013-05-27T02:49:00Z', 'video da ultima versao em https://vimeo.com/pet-0-3-1'],
  ['hybrid', '2013-05-27T12:29:00Z',
   'referencias interessantes por filter0 http://ubuntuone.com/7/Nb92IA2tXISAmjP23G3 de emergencia de padroes estruturais por sincronizacao e http://www3.nd.edu/~netsci/TALKS/Sayama_CT.pdf automatos geradores de redes GNA (generative net aut)'],
  ['hybrid', '2013-05-27T16:16:00Z', 'gabithume inaugura participacao macambira no GPW Mozilla'],
  ['aut0mata', '2013-05-27T16:21:00Z',
   'gabithume OPW Mozilla https://live.gnome.org/OutreachProgramForWomen/2013/JuneSeptember#Accepted_Participants'],
  ['hybrid', '2013-05-27T18:28:00Z',
   'achada a quinta e terceira edicao do livro do luger: http://ubuntuone.com/5gMOkYtchUDaR7Yqw2KTX'],
  ['v1z', '2013-05-28T01:37:00Z',
   'tentando encontrar um balanço entre detalhe e velocidade no curso de Pattern Theory - nao quero ficar no cap 1 o curso todo'],
  ['filter0', '2013-05-28T03:25:00Z', 'aprendendo relatividade geral enquanto o python faz contas'],
  ['hybrid', '2013-05-28T12:06:00Z',
   'respondidos os interessados na pesquisa de redes e amigos, feita reuniao com -chu, encaminhada da infra para xerox e impressao e acompanhada defesa de desambiguacao do fernando nobre'],
];

let server: ChildProcess;
let base = '';

function waitListen(proc: ChildProcess): Promise<string> {
  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error('server never listened')), 15_000);
    let buffer = '';
    proc.stdout!.on('data', (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/http:\/\/[\d.]+:\d+/);
      if (match) {
        clearTimeout(timer);
        resolve(match[0]);
      }
    });
    proc.on('exit', (code) => reject(new Error(`server exited early (${code}): ${buffer}`)));
  });
}

async function postShout(author: string, clientTs: string, text: string, seq: number) {
  const resp = await fetch(`${base}/api/shouts`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify({
      auth_token: tokenFor(author),
      text,
      client_ts: clientTs,
      client_id: `e2e-${author}`,
      seq,
    }),
  });
  const body = await resp.text();
  assert.equal(resp.status, 200, body);
  return JSON.parse(body);
}

before(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), 'aa-e2e-'));
  for (const nick of NICKS) {
    execFileSync(PYTHON, [
      '-m', 'aa.server_cli', 'admin', 'add-dev', nick,
      '--data-dir', dataDir, '--token', tokenFor(nick),
      '--relay-token', `${nick}-relay-0123456789abcdef`,
    ]);
  }
  const distDir = join(dirname(fileURLToPath(import.meta.url)), '..', '..', 'dist');
  server = spawn(PYTHON, [
    '-m', 'aa.server_cli', 'serve', '--data-dir', dataDir, '--port', '0',
    '--scan-interval', '0.2', '--static-dir', distDir,
  ]);
  base = await waitListen(server);

  const seqs = new Map<string, number>();
  for (const [author, ts, text] of FIXTURE) {
    const seq = seqs.get(author) ?? 0;
    seqs.set(author, seq + 1);
    await postShout(author, ts, text, seq);
  }
});

after(() => {
  server?.kill();
});

test('feed page renders the corpus in API order with display dates', async () => {
  const page = await getFeed({}, base);
  assert.equal(page.entries.length, 16);
  assert.equal(page.entries[0]!.author, 'hybrid');

  const html = renderFeedRows(page.entries);
  const positions = page.entries.map((e) => html.indexOf(`>${e.author}</a>`));
  // row order in markup follows entry order (indexOf is monotone per row block)
  const rowStarts = [...html.matchAll(/<tr>/g)].map((m) => m.index!);
  assert.equal(rowStarts.length, 16);
  assert.ok(positions[0]! < rowStarts[1]!, 'first entry rendered in the first row');
  assert.ok(html.startsWith('<tr>'));
  assert.ok(html.includes('28/05/2013 12:06'));
  assert.ok(html.includes('title="2013-05-28T12:06:00Z"'));
});

test('nick filter narrows the feed', async () => {
  const page = await getFeed({ author: 'filter0' }, base);
  assert.equal(page.entries.length, 1);
  assert.equal(page.entries[0]!.text,
    'aprendendo relatividade geral enquanto o python faz contas');
});

test('cursor pagination walks every row exactly once', async () => {
  const seen: number[] = [];
  let cursor: string | undefined;
  for (;;) {
    const page = await getFeed({ limit: 5, cursor }, base);
    seen.push(...page.entries.map((e) => e.id));
    if (!page.next_cursor) break;
    cursor = page.next_cursor;
  }
  assert.equal(seen.length, 16);
  assert.equal(new Set(seen).size, 16);
});

test('session detail page shows the 27/05 run', async () => {
  const sessions = await getSessions(
    { author: 'v1z', from: '2013-05-27T00:00:00Z', to: '2013-05-28T00:00:00Z' }, base);
  assert.equal(sessions.length, 1);
  const detail = await getSession(sessions[0]!.session_id, base);
  assert.equal(detail.shout_count, 7);
  assert.equal(detail.duration_s, 9300);

  const html = renderSessionDetail(detail);
  assert.ok(html.includes('2h35m'));
  assert.ok(html.includes('investigando pq sprite ta borrada'));
  assert.ok(html.includes('<a href="https://vimeo.com/pet-0-3-1"'));
});

test('validation page records a verdict and renders the 409 path', async () => {
  // the scan worker assigns validators to the closed 2013 sessions; find a
  // token through each developer's pending list
  let token = '';
  const deadline = Date.now() + 15_000;
  while (!token && Date.now() < deadline) {
    for (const nick of NICKS) {
      const resp = await fetch(
        `${base}/api/validations/pending?auth_token=${tokenFor(nick)}`);
      const pending = (await resp.json()) as Array<{ token: string }>;
      if (pending.length > 0) {
        token = pending[0]!.token;
        break;
      }
    }
    if (!token) await new Promise((r) => setTimeout(r, 100));
  }
  assert.ok(token, 'scan worker produced an assignment');

  const detail = await getValidation(token, base);
  assert.equal(detail.assignment.verdict, null);
  const form = renderReviewForm(detail);
  assert.ok(form.includes('id="verdict-form"'));

  const decided = await postVerdict(token, 'valid', 'revisado de ponta a ponta', base);
  assert.equal(decided.verdict, 'valid');
  assert.ok(renderDecided(decided, 'verdict recorded').includes('badge-valid'));

  // double submit: the server answers 409 and the UI shows what was recorded
  await assert.rejects(
    () => postVerdict(token, 'invalid', undefined, base),
    (err: unknown) => err instanceof ApiError && err.status === 409,
  );
  const latest = await getValidation(token, base);
  assert.equal(latest.assignment.verdict, 'valid');
  assert.ok(renderDecided(latest.assignment).includes('already decided'));

  // unknown tokens 404
  await assert.rejects(
    () => getValidation('nao-existe', base),
    (err: unknown) => err instanceof ApiError && err.status === 404,
  );
});

test('a shout containing <script> renders as literal text end to end', async () => {
  await postShout('v1z', '2013-05-28T13:00:00Z',
    '<script>alert("pwned")</script> teste de injecao', 90);
  const page = await getFeed({ author: 'v1z', limit: 5 }, base);
  assert.ok(page.entries[0]!.text.startsWith('<script>'));
  const html = renderFeedRows(page.entries);
  assert.ok(!html.includes('<script>'));
  assert.ok(html.includes('&lt;script&gt;alert(&quot;pwned&quot;)&lt;/script&gt;'));
});

test('the server serves the compiled dashboard bundle', async () => {
  const shell = await (await fetch(`${base}/`)).text();
  assert.ok(shell.includes('pAAnel'));
  assert.ok(shell.includes('/assets/main.js'));
  const mod = await (await fetch(`${base}/assets/main.js`)).text();
  assert.ok(mod.includes('route(document)'));
  const spa = await (await fetch(`${base}/validate/um-token-qualquer`)).text();
  assert.ok(spa.includes('pAAnel')); // SPA fallback serves the shell
});
