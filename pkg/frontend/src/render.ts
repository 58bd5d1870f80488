/**
 * HTML renderers: pure functions from view-model values to markup
 * strings. No DOM reads, no state. Interactive elements carry data-
 * attributes the bootstrap wires up by delegation.
 */

import type { ParetoView, Screen } from "./model.js";
import type {
  DisplayPayload,
  ParetoPayload,
  QueryOption,
  StatePayload,
} from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function fmt(value: number | null, digits = 3): string {
  if (value === null || Number.isNaN(value)) return "–";
  return value.toFixed(digits);
}

function renderDisplay(display: DisplayPayload): string {
  // opaque server content, rendered as sent
  const parts: string[] = [];
  if (typeof display.label === "string") {
    parts.push(`<span class="label">${escapeHtml(display.label)}</span>`);
  }
  if (typeof display.text === "string") {
    parts.push(`<p class="display-text">${escapeHtml(display.text)}</p>`);
  }
  if (typeof display.image_url === "string") {
    parts.push(`<img src="${escapeHtml(display.image_url)}" alt="">`);
  }
  return parts.join("");
}

function renderCard(option: QueryOption, selected: boolean, anySelected: boolean): string {
  // selected cards go green; once anything is selected the rest preview
  // as rejected (red), because submitting means rejecting them
  const cls = selected ? "card selected" : anySelected ? "card rejected-preview" : "card";
  const coords = option.coords.map((c) => `<td>${fmt(c, 4)}</td>`).join("");
  return `
    <div class="${cls}" data-option-id="${option.id}" role="button" aria-pressed="${selected}">
      ${renderDisplay(option.display)}
      <table class="coords"><tr>${coords}</tr></table>
    </div>`;
}

function renderParetoPanel(pareto: ParetoView, state: StatePayload): string {
  if (pareto === null) return "";
  if (pareto === "pending") {
    return `<section class="pareto"><h2>Pareto estimate</h2><p class="placeholder">fitting…</p></section>`;
  }
  const bars = pareto.ids
    .map((id, i) => {
      const prob = pareto.probs[i] ?? 0;
      const pct = Math.round(prob * 100);
      const member = pareto.indices.includes(id);
      return `
        <div class="bar-row${member ? " member" : ""}">
          <span class="bar-label">option ${id}</span>
          <span class="bar"><span class="bar-fill" style="width: ${pct}%"></span></span>
          <span class="bar-pct">${pct}%</span>
        </div>`;
    })
    .join("");
  return `
    <section class="pareto">
      <h2>Pareto estimate</h2>
      <div class="bars">${bars}</div>
      ${renderLatentScatter(state, pareto)}
    </section>`;
}

/** Two-dimensional latent embeddings as a scatter; only drawn when the
 * model has exactly two latent dimensions to plot. */
function renderLatentScatter(state: StatePayload, pareto: ParetoPayload): string {
  const means = state.latent_means;
  if (state.n_e !== 2 || means === null || means.length === 0) return "";
  const xs = means.map((row) => row[0] ?? 0);
  const ys = means.map((row) => row[1] ?? 0);
  const lo: [number, number] = [Math.min(...xs), Math.min(...ys)];
  const hi: [number, number] = [Math.max(...xs), Math.max(...ys)];
  const side = 240;
  const pad = 12;
  const scale = (v: number, axis: 0 | 1) => {
    const span = hi[axis] - lo[axis];
    const unit = span > 0 ? (v - lo[axis]) / span : 0.5;
    const px = pad + unit * (side - 2 * pad);
    return axis === 1 ? side - px : px; // y grows upward
  };
  const dots = means
    .map((row, i) => {
      const cls = pareto.indices.includes(i) ? "dot pareto-member" : "dot";
      return `<circle class="${cls}" cx="${scale(row[0] ?? 0, 0).toFixed(1)}" cy="${scale(row[1] ?? 0, 1).toFixed(1)}" r="4"><title>option ${i}</title></circle>`;
    })
    .join("");
  return `<svg class="latent-scatter" viewBox="0 0 ${side} ${side}" width="${side}" height="${side}">${dots}</svg>`;
}

function renderHistory(state: StatePayload): string {
  if (state.history.length === 0) return "";
  const items = state.history
    .map(
      (entry, i) => `
        <li><span class="round">#${i + 1}</span>
          picked <b>${entry.chosen.join(", ")}</b>
          from [${entry.set.join(", ")}]</li>`,
    )
    .join("");
  return `<section class="history"><h2>Choices so far</h2><ol>${items}</ol></section>`;
}

function renderStatus(state: StatePayload): string {
  const last = state.metrics[state.metrics.length - 1];
  const gap = last ? fmt(last.log_hv_diff) : "–";
  const left = state.init_queries_left;
  const phase =
    left > 0
      ? `${left} warm-up round${left === 1 ? "" : "s"} left`
      : `round ${state.iteration} of ${state.budget}`;
  return `
    <header class="status">
      <span class="session-id">${escapeHtml(state.id)}</span>
      <span class="phase">${phase}</span>
      <span class="gap" title="log10 hypervolume gap">gap ${gap}</span>
    </header>`;
}

export function renderBanner(text: string | null): string {
  if (text === null) return "";
  return `
    <div class="banner" role="alert">
      ${escapeHtml(text)}
      <button id="retry" type="button">retry</button>
    </div>`;
}

export function renderScreen(screen: Screen): string {
  switch (screen.kind) {
    case "connecting":
      return `<p class="placeholder">connecting…</p>`;
    case "fitting":
      return `
        ${renderStatus(screen.state)}
        <p class="placeholder">fitting the model…</p>
        ${renderHistory(screen.state)}
        ${renderParetoPanel(screen.pareto, screen.state)}`;
    case "done": {
      const s = screen.state;
      return `
        ${renderStatus(s)}
        <section class="summary">
          <h2>Session finished</h2>
          <p>${s.history.length} choices over ${s.options.length} options,
             ${s.iteration} of ${s.budget} rounds.</p>
        </section>
        ${renderHistory(s)}
        ${renderParetoPanel(screen.pareto, s)}`;
    }
    case "query": {
      const { query, selected, notice, message, state } = screen;
      const cards = query.options
        .map((o) => renderCard(o, selected.has(o.id), selected.size > 0))
        .join("");
      return `
        ${renderStatus(state)}
        <section class="query">
          <h2>Pick every option you consider best</h2>
          ${notice !== null ? `<p class="notice">${escapeHtml(notice)}</p>` : ""}
          <div class="cards">${cards}</div>
          ${message !== null ? `<p class="message" role="alert">${escapeHtml(message)}</p>` : ""}
          <button id="submit" type="button" ${selected.size === 0 ? "disabled" : ""}>
            Submit ${selected.size > 0 ? `(${selected.size})` : ""}
          </button>
        </section>
        ${renderHistory(state)}
        ${renderParetoPanel(screen.pareto, state)}`;
    }
  }
}

export function renderApp(screen: Screen, banner: string | null): string {
  return `${renderBanner(banner)}${renderScreen(screen)}`;
}
