import { badgeClass, bestSentenceIndex, progress, splitSentences } from './logic';
import { PairDetail, QueueItem, Stats } from './types';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function similarityBadge(similarity: number | null, threshold: number): string {
  const label = similarity === null ? 'n/a' : similarity.toFixed(3);
  return `<span class="badge ${badgeClass(similarity, threshold)}">${label}</span>`;
}

export function renderStatsHeader(stats: Stats | null, reviewer: string): string {
  if (stats === null) {
    return `<header class="stats"><span>loading stats...</span></header>`;
  }
  const decided = stats.total - stats.pending - stats.flagged;
  const pct = Math.round(progress(stats) * 100);
  const entropy = stats.entropy === null ? 'n/a' : stats.entropy.toFixed(2);
  return `
    <header class="stats">
      <div class="progress" title="${decided} of ${stats.total} decided">
        <div class="progress-bar" style="width: ${pct}%"></div>
        <span class="progress-text">${decided}/${stats.total} decided (${pct}%)</span>
      </div>
      <span class="stat">flagged: <strong>${stats.flagged}</strong></span>
      <span class="stat">accepted: ${stats.accepted}</span>
      <span class="stat">rejected: ${stats.rejected}</span>
      <span class="stat">edited: ${stats.edited}</span>
      <span class="stat">entropy: ${entropy} bits</span>
      <label class="reviewer">reviewer
        <input id="reviewer-input" type="text" value="${escapeHtml(reviewer)}">
      </label>
    </header>`;
}

export function renderEmptyState(): string {
  return `<div class="empty">No pairs match this filter. Adjust the filters above, or export the curated dataset.</div>`;
}

export function renderQueue(
  items: QueueItem[],
  total: number,
  focusIndex: number,
  threshold: number,
  statusFilter: string,
  typeFilter: string,
): string {
  const options = (values: string[], current: string) =>
    values
      .map((v) => `<option value="${v}" ${v === current ? 'selected' : ''}>${v}</option>`)
      .join('');
  const rows = items.length
    ? items
        .map(
          (item, i) => `
      <tr class="queue-row ${i === focusIndex ? 'focused' : ''}" data-pair-id="${item.pair_id}" data-index="${i}">
        <td>${similarityBadge(item.similarity, threshold)}</td>
        <td class="q">${escapeHtml(item.question)}</td>
        <td class="type">${escapeHtml(item.question_type)}</td>
        <td class="status">${item.status}</td>
        <td class="src">${escapeHtml(item.source_ref)}</td>
      </tr>`,
        )
        .join('')
    : '';
  return `
    <section class="queue">
      <div class="filters">
        <label>status
          <select id="status-filter">${options(['flagged', 'pending', 'all'], statusFilter)}</select>
        </label>
        <label>type
          <select id="type-filter">${options(
            ['all', 'fundamental_recall', 'technical_explanation', 'multi_step_analytical'],
            typeFilter,
          )}</select>
        </label>
        <span class="hint">keys: A accept, R reject, E edit; click a row for detail</span>
        <span class="total">${total} pair${total === 1 ? '' : 's'}</span>
      </div>
      ${
        items.length
          ? `<table class="queue-table">
        <thead><tr><th>similarity</th><th>question</th><th>type</th><th>status</th><th>source</th></tr></thead>
        <tbody>${rows}</tbody>
      </table>`
          : renderEmptyState()
      }
    </section>`;
}

export function renderChunkWithHighlight(chunkText: string, question: string): string {
  const sentences = splitSentences(chunkText);
  const best = bestSentenceIndex(chunkText, question);
  return sentences
    .map((sentence, i) =>
      i === best ? `<mark>${escapeHtml(sentence)}</mark>` : escapeHtml(sentence),
    )
    .join(' ');
}

export function renderDetail(detail: PairDetail, threshold: number, editing: boolean): string {
  const pair = detail.pair;
  const decision = detail.decision
    ? `<p class="decision-note">last decision: <code>${detail.decision.verdict}</code> by ${escapeHtml(
        detail.decision.reviewer,
      )} at ${detail.decision.timestamp}</p>`
    : '';
  const editForm = editing
    ? `
      <form id="edit-form">
        <label>question
          <textarea id="edit-question" rows="3">${escapeHtml(pair.question)}</textarea>
        </label>
        <label>answer
          <textarea id="edit-answer" rows="6">${escapeHtml(pair.answer)}</textarea>
        </label>
        <div class="edit-error" id="edit-error"></div>
        <button type="submit" id="edit-submit">Submit edit</button>
        <button type="button" id="edit-cancel">Cancel</button>
      </form>`
    : '';
  return `
    <section class="detail" data-pair-id="${pair.pair_id}">
      <button id="back-to-queue">&larr; queue</button>
      <div class="detail-columns">
        <div class="pair-panel">
          <h2>${escapeHtml(pair.question)}</h2>
          <p class="meta">
            ${similarityBadge(pair.similarity, threshold)}
            <span class="type">${escapeHtml(pair.question_type)}</span>
            <span class="status">${pair.status}</span>
            <span class="src">${escapeHtml(pair.source_ref)}</span>
          </p>
          <p class="answer">${escapeHtml(pair.answer)}</p>
          ${decision}
          <div class="actions">
            <button id="btn-accept">Accept (A)</button>
            <button id="btn-reject">Reject (R)</button>
            <button id="btn-edit">Edit (E)</button>
          </div>
          ${editForm}
        </div>
        <div class="chunk-panel">
          <h3>source chunk</h3>
          <p class="chunk-text">${renderChunkWithHighlight(detail.chunk_text, pair.question)}</p>
        </div>
      </div>
    </section>`;
}

export function renderBanner(message: string, kind: 'error' | 'conflict'): string {
  const reload = kind === 'conflict' ? `<button id="banner-reload">Reload</button>` : '';
  return `<div class="banner banner-${kind}">${escapeHtml(message)} ${reload}</div>`;
}
