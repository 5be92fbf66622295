import { QueueItem } from './types';

// Pure view logic, kept free of DOM and network so it is directly testable.

/** Worst first: similarity ascending, unknown similarity last, id tiebreak. */
export function worstFirst(items: QueueItem[]): QueueItem[] {
  return [...items].sort((a, b) => {
    if (a.similarity === null && b.similarity === null) {
      return a.pair_id < b.pair_id ? -1 : 1;
    }
    if (a.similarity === null) return 1;
    if (b.similarity === null) return -1;
    if (a.similarity !== b.similarity) return a.similarity - b.similarity;
    return a.pair_id < b.pair_id ? -1 : 1;
  });
}

/** Red strictly below the threshold, green at or above (matches the flag rule). */
export function badgeClass(similarity: number | null, threshold: number): string {
  if (similarity === null) return 'badge-unknown';
  return similarity < threshold ? 'badge-low' : 'badge-ok';
}

export interface EditFields {
  question: string;
  answer: string;
}

/**
 * An edit must change at least one field to a non-blank value; blanking both
 * is the client-side mirror of the server's 422.
 */
export function validateEdit(fields: EditFields, original: EditFields): string | null {
  if (!fields.question.trim() && !fields.answer.trim()) {
    return 'Provide an edited question or an edited answer.';
  }
  if (Object.keys(editPayload(fields, original)).length === 0) {
    return 'No changes to submit.';
  }
  return null;
}

/** Fields to send: only those that differ from the original and are non-blank. */
export function editPayload(
  fields: EditFields,
  original: EditFields,
): { edited_question?: string; edited_answer?: string } {
  const out: { edited_question?: string; edited_answer?: string } = {};
  const question = fields.question.trim();
  const answer = fields.answer.trim();
  if (question && question !== original.question.trim()) out.edited_question = question;
  if (answer && answer !== original.answer.trim()) out.edited_answer = answer;
  return out;
}

const TOKEN_RE = /[0-9a-z]+/g;

export function tokenize(text: string): string[] {
  return text.toLowerCase().match(TOKEN_RE) ?? [];
}

/** Split on sentence ends, keeping delimiters with the preceding sentence. */
export function splitSentences(text: string): string[] {
  return text.split(/(?<=[.!?])\s+/).filter((s) => s.length > 0);
}

/**
 * Index of the chunk sentence sharing the most tokens with the question
 * (ties to the earliest). -1 when nothing overlaps.
 */
export function bestSentenceIndex(chunkText: string, question: string): number {
  const questionTokens = new Set(tokenize(question));
  let best = -1;
  let bestScore = 0;
  splitSentences(chunkText).forEach((sentence, i) => {
    let score = 0;
    for (const token of new Set(tokenize(sentence))) {
      if (questionTokens.has(token)) score += 1;
    }
    if (score > bestScore) {
      bestScore = score;
      best = i;
    }
  });
  return best;
}

/** Focus moves to the next undecided row after a decision, clamped to the list. */
export function nextFocusIndex(listLength: number, decidedIndex: number): number {
  if (listLength <= 1) return -1;
  return Math.min(decidedIndex, listLength - 2);
}

export function progress(stats: { total: number; pending: number; flagged: number }): number {
  if (stats.total === 0) return 0;
  const decided = stats.total - stats.pending - stats.flagged;
  return decided / stats.total;
}
