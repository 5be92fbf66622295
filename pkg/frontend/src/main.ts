import { ApiError, getPair, getQueue, getStats, postDecision } from './api';
import { editPayload, nextFocusIndex, validateEdit, worstFirst } from './logic';
import { DecisionBody, PairDetail, QueueItem, Stats, Verdict } from './types';
import { renderBanner, renderDetail, renderQueue, renderStatsHeader } from './views';

const STATS_POLL_MS = 5000;

interface AppState {
  stats: Stats | null;
  items: QueueItem[];
  total: number;
  focusIndex: number;
  statusFilter: 'flagged' | 'pending' | 'all';
  typeFilter: string;
  detail: PairDetail | null;
  editing: boolean;
  banner: { message: string; kind: 'error' | 'conflict' } | null;
  reviewer: string;
}

const state: AppState = {
  stats: null,
  items: [],
  total: 0,
  focusIndex: 0,
  statusFilter: 'flagged',
  typeFilter: 'all',
  detail: null,
  editing: false,
  banner: null,
  reviewer: 'reviewer',
};

function threshold(): number {
  return state.stats?.threshold ?? 0.8;
}

function visibleItems(): QueueItem[] {
  const filtered =
    state.typeFilter === 'all'
      ? state.items
      : state.items.filter((item) => item.question_type === state.typeFilter);
  return worstFirst(filtered);
}

function root(): HTMLElement {
  const el = document.getElementById('app');
  if (!el) throw new Error('missing #app container');
  return el;
}

function render(): void {
  const items = visibleItems();
  if (state.focusIndex >= items.length) state.focusIndex = items.length - 1;
  if (state.focusIndex < 0 && items.length) state.focusIndex = 0;
  const body = state.detail
    ? renderDetail(state.detail, threshold(), state.editing)
    : renderQueue(items, state.total, state.focusIndex, threshold(),
                  state.statusFilter, state.typeFilter);
  root().innerHTML = `
    ${state.banner ? renderBanner(state.banner.message, state.banner.kind) : ''}
    ${renderStatsHeader(state.stats, state.reviewer)}
    ${body}`;
  attachListeners();
}

function attachListeners(): void {
  document.getElementById('banner-reload')?.addEventListener('click', () => {
    window.location.reload();
  });
  const reviewerInput = document.getElementById('reviewer-input') as HTMLInputElement | null;
  reviewerInput?.addEventListener('change', () => {
    state.reviewer = reviewerInput.value.trim() || 'reviewer';
  });

  if (state.detail) {
    attachDetailListeners();
    return;
  }

  document.getElementById('status-filter')?.addEventListener('change', (ev) => {
    state.statusFilter = (ev.target as HTMLSelectElement).value as AppState['statusFilter'];
    state.focusIndex = 0;
    void refreshQueue();
  });
  document.getElementById('type-filter')?.addEventListener('change', (ev) => {
    state.typeFilter = (ev.target as HTMLSelectElement).value;
    state.focusIndex = 0;
    render();
  });
  for (const row of Array.from(document.querySelectorAll<HTMLElement>('.queue-row'))) {
    row.addEventListener('click', () => {
      void openDetail(row.dataset.pairId as string);
    });
  }
}

function attachDetailListeners(): void {
  document.getElementById('back-to-queue')?.addEventListener('click', () => {
    state.detail = null;
    state.editing = false;
    void refreshQueue();
  });
  document.getElementById('btn-accept')?.addEventListener('click', () => {
    void decideCurrent('accept');
  });
  document.getElementById('btn-reject')?.addEventListener('click', () => {
    void decideCurrent('reject');
  });
  document.getElementById('btn-edit')?.addEventListener('click', () => {
    state.editing = true;
    render();
  });
  document.getElementById('edit-cancel')?.addEventListener('click', () => {
    state.editing = false;
    render();
  });
  document.getElementById('edit-form')?.addEventListener('submit', (ev) => {
    ev.preventDefault();
    void submitEdit();
  });
}

async function refreshStats(): Promise<void> {
  try {
    state.stats = await getStats();
  } catch (err) {
    showError(err);
  }
}

async function refreshQueue(): Promise<void> {
  try {
    const page = await getQueue(state.statusFilter, 0, 200);
    state.items = page.items;
    state.total = page.total;
  } catch (err) {
    showError(err);
  }
  render();
}

async function openDetail(pairId: string): Promise<void> {
  try {
    state.detail = await getPair(pairId);
    state.editing = false;
  } catch (err) {
    showError(err);
  }
  render();
}

function focusedPair(): QueueItem | null {
  const items = visibleItems();
  return items.length ? items[Math.max(0, state.focusIndex)] : null;
}

async function decideCurrent(verdict: Verdict): Promise<void> {
  const pairId = state.detail ? state.detail.pair.pair_id : focusedPair()?.pair_id;
  if (!pairId) return;
  await sendDecision(pairId, { verdict, reviewer: state.reviewer });
}

async function sendDecision(pairId: string, body: DecisionBody): Promise<void> {
  // optimistic: drop the pair from the queue view, roll back on failure
  const snapshotItems = state.items;
  const snapshotFocus = state.focusIndex;
  const visibleBefore = visibleItems();
  const decidedIndex = visibleBefore.findIndex((item) => item.pair_id === pairId);
  if (state.statusFilter !== 'all' && decidedIndex !== -1) {
    state.items = state.items.filter((item) => item.pair_id !== pairId);
    state.focusIndex = nextFocusIndex(visibleBefore.length, decidedIndex);
  }
  if (state.detail?.pair.pair_id === pairId) {
    state.detail = null;
    state.editing = false;
  }
  render();
  try {
    await postDecision(pairId, body);
    await Promise.all([refreshStats(), refreshQueue()]);
  } catch (err) {
    state.items = snapshotItems;
    state.focusIndex = snapshotFocus;
    showError(err);
    render();
  }
}

async function submitEdit(): Promise<void> {
  if (!state.detail) return;
  const original = { question: state.detail.pair.question, answer: state.detail.pair.answer };
  const fields = {
    question: (document.getElementById('edit-question') as HTMLTextAreaElement).value,
    answer: (document.getElementById('edit-answer') as HTMLTextAreaElement).value,
  };
  const problem = validateEdit(fields, original);
  if (problem) {
    const errorBox = document.getElementById('edit-error');
    if (errorBox) errorBox.textContent = problem;
    return;
  }
  await sendDecision(state.detail.pair.pair_id, {
    verdict: 'edit',
    reviewer: state.reviewer,
    ...editPayload(fields, original),
  });
}

function showError(err: unknown): void {
  if (err instanceof ApiError && err.status === 409) {
    state.banner = {
      message: 'The dataset changed on disk; reload to pick up the new data.',
      kind: 'conflict',
    };
  } else {
    const message = err instanceof Error ? err.message : String(err);
    state.banner = { message: `Request failed: ${message}`, kind: 'error' };
  }
}

function onKey(ev: KeyboardEvent): void {
  const target = ev.target as HTMLElement | null;
  if (target && (target.tagName === 'INPUT' || target.tagName === 'TEXTAREA')) return;
  const key = ev.key.toLowerCase();
  if (key === 'a') void decideCurrent('accept');
  else if (key === 'r') void decideCurrent('reject');
  else if (key === 'e') {
    if (state.detail) {
      state.editing = true;
      render();
    } else {
      const pair = focusedPair();
      if (pair) {
        void openDetail(pair.pair_id).then(() => {
          state.editing = true;
          render();
        });
      }
    }
  } else if (key === 'arrowdown' || key === 'j') {
    state.focusIndex = Math.min(state.focusIndex + 1, visibleItems().length - 1);
    render();
  } else if (key === 'arrowup' || key === 'k') {
    state.focusIndex = Math.max(state.focusIndex - 1, 0);
    render();
  } else if (key === 'enter' && !state.detail) {
    const pair = focusedPair();
    if (pair) void openDetail(pair.pair_id);
  }
}

let pollTimer: ReturnType<typeof setInterval> | null = null;

function startPolling(): void {
  if (pollTimer !== null) return;
  pollTimer = setInterval(() => {
    void refreshStats().then(render);
  }, STATS_POLL_MS);
}

function stopPolling(): void {
  if (pollTimer !== null) {
    clearInterval(pollTimer);
    pollTimer = null;
  }
}

export async function bootstrap(): Promise<void> {
  document.addEventListener('keydown', onKey);
  document.addEventListener('visibilitychange', () => {
    // paused while the tab is hidden
    if (document.hidden) stopPolling();
    else startPolling();
  });
  await refreshStats();
  await refreshQueue();
  startPolling();
}

/** Test hook: stop timers so the process can exit cleanly. */
export function teardown(): void {
  stopPolling();
  document.removeEventListener('keydown', onKey);
}

declare global {
  interface Window {
    __SYNTHQA_MANUAL_BOOT__?: boolean;
  }
}

if (typeof window !== 'undefined' && !window.__SYNTHQA_MANUAL_BOOT__) {
  void bootstrap();
}
