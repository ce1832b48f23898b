import { describe, expect, it } from 'vitest';

import type { SessionView } from '../src/api.js';
import { initialState } from '../src/state.js';
import { renderWorkbench } from '../src/view.js';

function baseView(overrides: Partial<SessionView> = {}): SessionView {
  return {
    session_id: 's-1',
    participant_id: 'p-1',
    task_id: 'demo-task',
    phase: 'spec_loaded',
    outcome: 'pending',
    remaining_budget_seconds: 1200,
    budget_seconds: 2400,
    spec_document: 'function_name = "f"\nsignature = "f(x)"\n',
    function_name: 'f',
    suite: null,
    function: null,
    report: null,
    advice: null,
    event_seq: 2,
    dropped_events: 0,
    ...overrides,
  };
}

function stateWith(view: SessionView) {
  const state = initialState();
  state.view = view;
  return state;
}

describe('renderWorkbench', () => {
  it('fresh session shows an empty tests area with a single produce control', () => {
    const html = renderWorkbench(stateWith(baseView()));
    expect(html).toContain('No test suite yet');
    expect((html.match(/data-action="produce-suite"/g) ?? []).length).toBe(1);
    expect(html).toContain('function_name');
  });

  it('partial failure renders seven pass and three fail badges plus 70%', () => {
    const perTest = Array.from({ length: 10 }, (_, i) => ({
      test_id: `id-${i}`,
      name: `test_${i}`,
      outcome: i < 7 ? 'pass' : 'fail',
      message: i < 7 ? null : 'AssertionError: nope',
    }));
    const view = baseView({
      phase: 'executed',
      suite: {
        version: 1,
        tests: perTest.map((t) => ({ test_id: t.test_id, name: t.name, body: 'def ...', origin: 'generated' })),
      },
      function: { version: 1, source: 'def f(x): ...' },
      report: {
        pass_count: 7,
        total_count: 10,
        coverage: 0.9,
        all_pass: false,
        suite_version: 1,
        function_version: 1,
        per_test: perTest,
      },
    });
    const html = renderWorkbench(stateWith(view));
    const results = html.split('<ul class="results">')[1];
    expect((results.match(/badge pass/g) ?? []).length).toBe(7);
    expect((results.match(/badge fail/g) ?? []).length).toBe(3);
    expect(html).toContain('>70%</strong>');
  });

  it('expired session disables mutating controls and shows the notice', () => {
    const view = baseView({
      phase: 'expired',
      remaining_budget_seconds: 0,
      suite: { version: 1, tests: [{ test_id: 'a', name: 'test_a', body: 'def ...', origin: 'generated' }] },
    });
    const html = renderWorkbench(stateWith(view));
    expect(html).toContain('data-role="expiry-notice"');
    const buttons = html.match(/<button[^>]*data-action[^>]*>/g) ?? [];
    expect(buttons.length).toBeGreaterThan(0);
    for (const button of buttons) {
      expect(button).toContain('disabled');
    }
  });

  it('escapes HTML in user-controlled content', () => {
    const view = baseView({ spec_document: '<script>alert(1)</script>' });
    const html = renderWorkbench(stateWith(view));
    expect(html).not.toContain('<script>alert');
    expect(html).toContain('&lt;script&gt;');
  });

  it('countdown is rendered from remaining budget', () => {
    const html = renderWorkbench(stateWith(baseView({ remaining_budget_seconds: 65 })));
    expect(html).toContain('data-role="countdown">01:05');
  });
});
