// Shapes mirror the review service JSON API verbatim.

export type Verdict = 'accept' | 'reject' | 'edit';

export type PairStatus = 'pending' | 'flagged' | 'accepted' | 'rejected' | 'edited';

export interface QueueItem {
  pair_id: string;
  question: string;
  answer: string;
  question_type: string;
  similarity: number | null;
  status: PairStatus;
  source_ref: string;
  chunk_excerpt: string;
}

export interface QueuePage {
  items: QueueItem[];
  total: number;
  offset: number;
  limit: number;
}

export interface PairRecord {
  pair_id: string;
  chunk_id: string;
  question: string;
  answer: string;
  question_type: string;
  source_ref: string;
  similarity: number | null;
  status: PairStatus;
}

export interface DecisionRecord {
  pair_id: string;
  verdict: Verdict;
  edited_question: string | null;
  edited_answer: string | null;
  reviewer: string;
  timestamp: string;
  decision_seq: number;
}

export interface PairDetail {
  pair: PairRecord;
  chunk_text: string;
  source_ref: string;
  decision: DecisionRecord | null;
}

export interface Stats {
  pending: number;
  flagged: number;
  accepted: number;
  rejected: number;
  edited: number;
  total: number;
  entropy: number | null;
  threshold: number | null;
}

export interface DecisionBody {
  verdict: Verdict;
  edited_question?: string;
  edited_answer?: string;
  reviewer: string;
}
