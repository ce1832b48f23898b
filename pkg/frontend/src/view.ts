/** HTML renderers for the three workbench areas. Pure string builders. */

import type { SessionView } from './api.js';
import {
  badgeFor,
  ControlFlags,
  controlsFor,
  formatCountdown,
  passRateLabel,
  phaseLabel,
  UiState,
} from './state.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

function button(action: string, label: string, enabled: boolean, target = ''): string {
  const disabled = enabled ? '' : ' disabled';
  const data = target ? ` data-target="${escapeHtml(target)}"` : '';
  return `<button data-action="${action}"${data}${disabled}>${escapeHtml(label)}</button>`;
}

export function renderHeader(state: UiState): string {
  const view = state.view;
  if (view === null) {
    return '<header><h1>specfirst workbench</h1><p>No session.</p></header>';
  }
  const countdown = formatCountdown(view.remaining_budget_seconds);
  const error = state.error ? `<p class="error">${escapeHtml(state.error)}</p>` : '';
  const busy = state.pending ? '<span class="spinner" data-role="spinner">working…</span>' : '';
  return `<header>
    <h1>specfirst workbench</h1>
    <p>
      <span class="session">session ${escapeHtml(view.session_id)}</span>
      · task <strong>${escapeHtml(view.task_id)}</strong>
      · phase <strong data-role="phase">${escapeHtml(phaseLabel(view))}</strong>
      · time left <strong data-role="countdown">${countdown}</strong>
      ${busy}
    </p>
    ${error}
  </header>`;
}

/** Area 1: the problem specification document. */
export function renderSpecPanel(view: SessionView | null): string {
  if (view === null) {
    return '<section id="spec-panel"><h2>1 · Specification</h2><p>No session loaded.</p></section>';
  }
  return `<section id="spec-panel">
    <h2>1 · Specification</h2>
    <pre class="spec-document">${escapeHtml(view.spec_document)}</pre>
  </section>`;
}

/** Area 2: the evolving test suite with per-test curation controls. */
export function renderTestsPanel(state: UiState, controls: ControlFlags): string {
  const view = state.view;
  const parts: string[] = ['<section id="tests-panel">', '<h2>2 · Tests</h2>'];
  if (view === null || view.suite === null) {
    parts.push('<p class="hint">No test suite yet.</p>');
    parts.push(button('produce-suite', 'Produce test suite', controls.produceSuite));
  } else {
    parts.push(`<p class="hint">suite v${view.suite.version}, ${view.suite.tests.length} tests</p>`);
    parts.push('<ul class="tests">');
    const outcomes = new Map<string, string>();
    if (view.report !== null && view.report.suite_version === view.suite.version) {
      for (const result of view.report.per_test) {
        outcomes.set(result.test_id, result.outcome);
      }
    }
    for (const test of view.suite.tests) {
      const outcome = outcomes.get(test.test_id);
      const badge = outcome ? `<span class="badge ${badgeFor(outcome)}">${escapeHtml(outcome)}</span>` : '';
      parts.push(`<li data-test-id="${escapeHtml(test.test_id)}">
        <div class="test-head"><code>${escapeHtml(test.name)}</code> <em>${escapeHtml(test.origin)}</em> ${badge}</div>
        <pre class="test-body">${escapeHtml(test.body)}</pre>
        <div class="test-actions">
          ${button('explain-test', 'Explain', controls.curation, test.test_id)}
          ${button('regenerate-test', 'Regenerate', controls.curation, test.test_id)}
          ${button('delete-test', 'Delete', controls.curation, test.test_id)}
          ${button('edit-test', 'Edit', controls.curation, test.test_id)}
        </div>
      </li>`);
    }
    parts.push('</ul>');
    parts.push(button('produce-suite', 'Regenerate whole suite', controls.produceSuite));
  }
  if (state.explanation !== null) {
    parts.push(`<div class="explanation"><h3>Explanation</h3><p>${escapeHtml(state.explanation)}</p></div>`);
  }
  parts.push('</section>');
  return parts.join('\n');
}

/** Area 3: generated function, per-test results, aggregate rate, advice. */
export function renderFunctionPanel(state: UiState, controls: ControlFlags): string {
  const view = state.view;
  const parts: string[] = ['<section id="function-panel">', '<h2>3 · Function</h2>'];
  if (view === null) {
    parts.push('<p class="hint">No session loaded.</p></section>');
    return parts.join('\n');
  }
  if (controls.showExpiryNotice) {
    parts.push('<p class="notice" data-role="expiry-notice">Time budget expired; the session is read-only.</p>');
  }
  const label = view.function === null ? 'Ask for the function' : 'Re-generate function';
  parts.push(button('generate-function', label, controls.askFunction));
  if (view.function !== null) {
    parts.push(`<h3>Implementation v${view.function.version} (read-only)</h3>`);
    parts.push(`<pre class="function-source" tabindex="0" data-role="function-source">${escapeHtml(view.function.source)}</pre>`);
  }
  if (view.report !== null) {
    const rate = passRateLabel(view.report);
    parts.push(`<p class="pass-rate">Pass rate: <strong data-role="pass-rate">${rate}</strong>
      (${view.report.pass_count}/${view.report.total_count})</p>`);
    parts.push('<ul class="results">');
    for (const result of view.report.per_test) {
      const badge = badgeFor(result.outcome);
      const message = result.message ? `<div class="failure">${escapeHtml(result.message)}</div>` : '';
      parts.push(`<li><span class="badge ${badge}">${escapeHtml(result.outcome)}</span>
        <code>${escapeHtml(result.name)}</code>${message}</li>`);
    }
    parts.push('</ul>');
    parts.push(button('request-advice', 'Advice from failures', controls.advice));
    if (view.function !== null) {
      parts.push(button('generate-function-with-advice', 'Re-generate with advice', controls.askFunction && view.advice !== null));
    }
  }
  if (view.advice !== null) {
    parts.push(`<div class="advice"><h3>Advice</h3><p>${escapeHtml(view.advice)}</p></div>`);
  }
  parts.push('</section>');
  return parts.join('\n');
}

export function renderWorkbench(state: UiState): string {
  const controls = controlsFor(state.view, state.pending);
  return [
    renderHeader(state),
    '<main class="three-panel">',
    renderSpecPanel(state.view),
    renderTestsPanel(state, controls),
    renderFunctionPanel(state, controls),
    '</main>',
  ].join('\n');
}
