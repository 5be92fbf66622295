import { DecisionBody, DecisionRecord, PairDetail, QueuePage, Stats } from './types';

// Same-origin by default; tests point this at a live server.
declare global {
  interface Window {
    __SYNTHQA_API_BASE__?: string;
  }
}

function base(): string {
  return (typeof window !== 'undefined' && window.__SYNTHQA_API_BASE__) || '';
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && typeof body.error === 'string') detail = body.error;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export async function getQueue(
  status: 'flagged' | 'pending' | 'all',
  offset = 0,
  limit = 50,
): Promise<QueuePage> {
  const resp = await fetch(
    `${base()}/api/queue?status=${status}&offset=${offset}&limit=${limit}`,
  );
  return asJson<QueuePage>(resp);
}

export async function getPair(pairId: string): Promise<PairDetail> {
  const resp = await fetch(`${base()}/api/pairs/${encodeURIComponent(pairId)}`);
  return asJson<PairDetail>(resp);
}

export async function postDecision(pairId: string, body: DecisionBody): Promise<DecisionRecord> {
  const resp = await fetch(`${base()}/api/pairs/${encodeURIComponent(pairId)}/decision`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(body),
  });
  return asJson<DecisionRecord>(resp);
}

export async function getStats(): Promise<Stats> {
  const resp = await fetch(`${base()}/api/stats`);
  return asJson<Stats>(resp);
}
