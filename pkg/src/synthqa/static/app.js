"use strict";
(() => {
  // src/api.ts
  function base() {
    return typeof window !== "undefined" && window.__SYNTHQA_API_BASE__ || "";
  }
  var ApiError = class extends Error {
    constructor(status, message) {
      super(message);
      this.status = status;
    }
  };
  async function asJson(resp) {
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.error === "string") detail = body.error;
      } catch {
      }
      throw new ApiError(resp.status, detail);
    }
    return await resp.json();
  }
  async function getQueue(status, offset = 0, limit = 50) {
    const resp = await fetch(
      `${base()}/api/queue?status=${status}&offset=${offset}&limit=${limit}`
    );
    return asJson(resp);
  }
  async function getPair(pairId) {
    const resp = await fetch(`${base()}/api/pairs/${encodeURIComponent(pairId)}`);
    return asJson(resp);
  }
  async function postDecision(pairId, body) {
    const resp = await fetch(`${base()}/api/pairs/${encodeURIComponent(pairId)}/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body)
    });
    return asJson(resp);
  }
  async function getStats() {
    const resp = await fetch(`${base()}/api/stats`);
    return asJson(resp);
  }

  // src/logic.ts
  function worstFirst(items) {
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
  function badgeClass(similarity, threshold2) {
    if (similarity === null) return "badge-unknown";
    return similarity < threshold2 ? "badge-low" : "badge-ok";
  }
  function validateEdit(fields, original) {
    const question = fields.question.trim();
    const answer = fields.answer.trim();
    if (!question && !answer) {
      return "Provide an edited question or an edited answer.";
    }
    if ((question || null) === original.question.trim() && (answer || null) === original.answer.trim()) {
      return "No changes to submit.";
    }
    return null;
  }
  function editPayload(fields, original) {
    const out = {};
    const question = fields.question.trim();
    const answer = fields.answer.trim();
    if (question && question !== original.question.trim()) out.edited_question = question;
    if (answer && answer !== original.answer.trim()) out.edited_answer = answer;
    return out;
  }
  var TOKEN_RE = /[0-9a-z]+/g;
  function tokenize(text) {
    return text.toLowerCase().match(TOKEN_RE) ?? [];
  }
  function splitSentences(text) {
    return text.split(/(?<=[.!?])\s+/).filter((s) => s.length > 0);
  }
  function bestSentenceIndex(chunkText, question) {
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
  function nextFocusIndex(listLength, decidedIndex) {
    if (listLength <= 1) return -1;
    return Math.min(decidedIndex, listLength - 2);
  }
  function progress(stats) {
    if (stats.total === 0) return 0;
    const decided = stats.total - stats.pending - stats.flagged;
    return decided / stats.total;
  }

  // src/views.ts
  function escapeHtml(text) {
    return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
  }
  function similarityBadge(similarity, threshold2) {
    const label = similarity === null ? "n/a" : similarity.toFixed(3);
    return `<span class="badge ${badgeClass(similarity, threshold2)}">${label}</span>`;
  }
  function renderStatsHeader(stats, reviewer) {
    if (stats === null) {
      return `<header class="stats"><span>loading stats...</span></header>`;
    }
    const decided = stats.total - stats.pending - stats.flagged;
    const pct = Math.round(progress(stats) * 100);
    const entropy = stats.entropy === null ? "n/a" : stats.entropy.toFixed(2);
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
  function renderEmptyState() {
    return `<div class="empty">No pairs match this filter. Adjust the filters above, or export the curated dataset.</div>`;
  }
  function renderQueue(items, total, focusIndex, threshold2, statusFilter, typeFilter) {
    const options = (values, current) => values.map((v) => `<option value="${v}" ${v === current ? "selected" : ""}>${v}</option>`).join("");
    const rows = items.length ? items.map(
      (item, i) => `
      <tr class="queue-row ${i === focusIndex ? "focused" : ""}" data-pair-id="${item.pair_id}" data-index="${i}">
        <td>${similarityBadge(item.similarity, threshold2)}</td>
        <td class="q">${escapeHtml(item.question)}</td>
        <td class="type">${escapeHtml(item.question_type)}</td>
        <td class="status">${item.status}</td>
        <td class="src">${escapeHtml(item.source_ref)}</td>
      </tr>`
    ).join("") : "";
    return `
    <section class="queue">
      <div class="filters">
        <label>status
          <select id="status-filter">${options(["flagged", "pending", "all"], statusFilter)}</select>
        </label>
        <label>type
          <select id="type-filter">${options(
      ["all", "fundamental_recall", "technical_explanation", "multi_step_analytical"],
      typeFilter
    )}</select>
        </label>
        <span class="hint">keys: A accept, R reject, E edit; click a row for detail</span>
        <span class="total">${total} pair${total === 1 ? "" : "s"}</span>
      </div>
      ${items.length ? `<table class="queue-table">
        <thead><tr><th>similarity</th><th>question</th><th>type</th><th>status</th><th>source</th></tr></thead>
        <tbody>${rows}</tbody>
      </table>` : renderEmptyState()}
    </section>`;
  }
  function renderChunkWithHighlight(chunkText, question) {
    const sentences = splitSentences(chunkText);
    const best = bestSentenceIndex(chunkText, question);
    return sentences.map(
      (sentence, i) => i === best ? `<mark>${escapeHtml(sentence)}</mark>` : escapeHtml(sentence)
    ).join(" ");
  }
  function renderDetail(detail, threshold2, editing) {
    const pair = detail.pair;
    const decision = detail.decision ? `<p class="decision-note">last decision: <code>${detail.decision.verdict}</code> by ${escapeHtml(
      detail.decision.reviewer
    )} at ${detail.decision.timestamp}</p>` : "";
    const editForm = editing ? `
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
      </form>` : "";
    return `
    <section class="detail" data-pair-id="${pair.pair_id}">
      <button id="back-to-queue">&larr; queue</button>
      <div class="detail-columns">
        <div class="pair-panel">
          <h2>${escapeHtml(pair.question)}</h2>
          <p class="meta">
            ${similarityBadge(pair.similarity, threshold2)}
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
  function renderBanner(message, kind) {
    const reload = kind === "conflict" ? `<button id="banner-reload">Reload</button>` : "";
    return `<div class="banner banner-${kind}">${escapeHtml(message)} ${reload}</div>`;
  }

  // src/main.ts
  var STATS_POLL_MS = 5e3;
  var state = {
    stats: null,
    items: [],
    total: 0,
    focusIndex: 0,
    statusFilter: "flagged",
    typeFilter: "all",
    detail: null,
    editing: false,
    banner: null,
    reviewer: "reviewer"
  };
  function threshold() {
    return state.stats?.threshold ?? 0.8;
  }
  function visibleItems() {
    const filtered = state.typeFilter === "all" ? state.items : state.items.filter((item) => item.question_type === state.typeFilter);
    return worstFirst(filtered);
  }
  function root() {
    const el = document.getElementById("app");
    if (!el) throw new Error("missing #app container");
    return el;
  }
  function render() {
    const items = visibleItems();
    if (state.focusIndex >= items.length) state.focusIndex = items.length - 1;
    if (state.focusIndex < 0 && items.length) state.focusIndex = 0;
    const body = state.detail ? renderDetail(state.detail, threshold(), state.editing) : renderQueue(
      items,
      state.total,
      state.focusIndex,
      threshold(),
      state.statusFilter,
      state.typeFilter
    );
    root().innerHTML = `
    ${state.banner ? renderBanner(state.banner.message, state.banner.kind) : ""}
    ${renderStatsHeader(state.stats, state.reviewer)}
    ${body}`;
    attachListeners();
  }
  function attachListeners() {
    document.getElementById("banner-reload")?.addEventListener("click", () => {
      window.location.reload();
    });
    const reviewerInput = document.getElementById("reviewer-input");
    reviewerInput?.addEventListener("change", () => {
      state.reviewer = reviewerInput.value.trim() || "reviewer";
    });
    if (state.detail) {
      attachDetailListeners();
      return;
    }
    document.getElementById("status-filter")?.addEventListener("change", (ev) => {
      state.statusFilter = ev.target.value;
      state.focusIndex = 0;
      void refreshQueue();
    });
    document.getElementById("type-filter")?.addEventListener("change", (ev) => {
      state.typeFilter = ev.target.value;
      state.focusIndex = 0;
      render();
    });
    for (const row of Array.from(document.querySelectorAll(".queue-row"))) {
      row.addEventListener("click", () => {
        void openDetail(row.dataset.pairId);
      });
    }
  }
  function attachDetailListeners() {
    document.getElementById("back-to-queue")?.addEventListener("click", () => {
      state.detail = null;
      state.editing = false;
      void refreshQueue();
    });
    document.getElementById("btn-accept")?.addEventListener("click", () => {
      void decideCurrent("accept");
    });
    document.getElementById("btn-reject")?.addEventListener("click", () => {
      void decideCurrent("reject");
    });
    document.getElementById("btn-edit")?.addEventListener("click", () => {
      state.editing = true;
      render();
    });
    document.getElementById("edit-cancel")?.addEventListener("click", () => {
      state.editing = false;
      render();
    });
    document.getElementById("edit-form")?.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void submitEdit();
    });
  }
  async function refreshStats() {
    try {
      state.stats = await getStats();
    } catch (err) {
      showError(err);
    }
  }
  async function refreshQueue() {
    try {
      const page = await getQueue(state.statusFilter, 0, 200);
      state.items = page.items;
      state.total = page.total;
    } catch (err) {
      showError(err);
    }
    render();
  }
  async function openDetail(pairId) {
    try {
      state.detail = await getPair(pairId);
      state.editing = false;
    } catch (err) {
      showError(err);
    }
    render();
  }
  function focusedPair() {
    const items = visibleItems();
    return items.length ? items[Math.max(0, state.focusIndex)] : null;
  }
  async function decideCurrent(verdict) {
    const pairId = state.detail ? state.detail.pair.pair_id : focusedPair()?.pair_id;
    if (!pairId) return;
    await sendDecision(pairId, { verdict, reviewer: state.reviewer });
  }
  async function sendDecision(pairId, body) {
    const snapshotItems = state.items;
    const snapshotFocus = state.focusIndex;
    const visibleBefore = visibleItems();
    const decidedIndex = visibleBefore.findIndex((item) => item.pair_id === pairId);
    if (state.statusFilter !== "all" && decidedIndex !== -1) {
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
  async function submitEdit() {
    if (!state.detail) return;
    const original = { question: state.detail.pair.question, answer: state.detail.pair.answer };
    const fields = {
      question: document.getElementById("edit-question").value,
      answer: document.getElementById("edit-answer").value
    };
    const problem = validateEdit(fields, original);
    if (problem) {
      const errorBox = document.getElementById("edit-error");
      if (errorBox) errorBox.textContent = problem;
      return;
    }
    await sendDecision(state.detail.pair.pair_id, {
      verdict: "edit",
      reviewer: state.reviewer,
      ...editPayload(fields, original)
    });
  }
  function showError(err) {
    if (err instanceof ApiError && err.status === 409) {
      state.banner = {
        message: "The dataset changed on disk; reload to pick up the new data.",
        kind: "conflict"
      };
    } else {
      const message = err instanceof Error ? err.message : String(err);
      state.banner = { message: `Request failed: ${message}`, kind: "error" };
    }
  }
  function onKey(ev) {
    const target = ev.target;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) return;
    const key = ev.key.toLowerCase();
    if (key === "a") void decideCurrent("accept");
    else if (key === "r") void decideCurrent("reject");
    else if (key === "e") {
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
    } else if (key === "arrowdown" || key === "j") {
      state.focusIndex = Math.min(state.focusIndex + 1, visibleItems().length - 1);
      render();
    } else if (key === "arrowup" || key === "k") {
      state.focusIndex = Math.max(state.focusIndex - 1, 0);
      render();
    } else if (key === "enter" && !state.detail) {
      const pair = focusedPair();
      if (pair) void openDetail(pair.pair_id);
    }
  }
  var pollTimer = null;
  function startPolling() {
    if (pollTimer !== null) return;
    pollTimer = setInterval(() => {
      void refreshStats().then(render);
    }, STATS_POLL_MS);
  }
  function stopPolling() {
    if (pollTimer !== null) {
      clearInterval(pollTimer);
      pollTimer = null;
    }
  }
  async function bootstrap() {
    document.addEventListener("keydown", onKey);
    document.addEventListener("visibilitychange", () => {
      if (document.hidden) stopPolling();
      else startPolling();
    });
    await refreshStats();
    await refreshQueue();
    startPolling();
  }
  void bootstrap();
})();
