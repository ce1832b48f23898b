import { describe, expect, it } from 'vitest';

import type { ReportView, SessionView } from '../src/api.js';
import { controlsFor, formatCountdown, passRateLabel } from '../src/state.js';

function view(overrides: Partial<SessionView> = {}): SessionView {
  return {
    session_id: 's-1',
    participant_id: 'p-1',
    task_id: 't-1',
    phase: 'spec_loaded',
    outcome: 'pending',
    remaining_budget_seconds: 2400,
    budget_seconds: 2400,
    spec_document: 'function_name = "f"',
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

function suite(n: number) {
  return {
    version: 1,
    tests: Array.from({ length: n }, (_, i) => ({
      test_id: `id-${i}`,
      name: `test_${i}`,
      body: `def test_${i}(): ...`,
      origin: 'generated',
    })),
  };
}

function report(passed: number, total: number): ReportView {
  return {
    pass_count: passed,
    total_count: total,
    coverage: null,
    all_pass: passed === total,
    suite_version: 1,
    function_version: 1,
    per_test: Array.from({ length: total }, (_, i) => ({
      test_id: `id-${i}`,
      name: `test_${i}`,
      outcome: i < passed ? 'pass' : 'fail',
      message: i < passed ? null : 'AssertionError',
    })),
  };
}

describe('controlsFor', () => {
  it('disables function controls before a suite exists', () => {
    const controls = controlsFor(view());
    expect(controls.produceSuite).toBe(true);
    expect(controls.askFunction).toBe(false);
    expect(controls.curation).toBe(false);
  });

  it('enables function controls once a suite exists', () => {
    const controls = controlsFor(view({ phase: 'suite_produced', suite: suite(3) }));
    expect(controls.askFunction).toBe(true);
    expect(controls.curation).toBe(true);
  });

  it('disables everything after expiry and shows the notice', () => {
    const controls = controlsFor(view({ phase: 'expired', suite: suite(3), remaining_budget_seconds: 0 }));
    expect(controls.produceSuite).toBe(false);
    expect(controls.curation).toBe(false);
    expect(controls.askFunction).toBe(false);
    expect(controls.advice).toBe(false);
    expect(controls.showExpiryNotice).toBe(true);
  });

  it('treats a zero countdown as expired even before the server flips phase', () => {
    const controls = controlsFor(view({ phase: 'curating', suite: suite(3), remaining_budget_seconds: 0 }));
    expect(controls.askFunction).toBe(false);
    expect(controls.showExpiryNotice).toBe(true);
  });

  it('disables everything on completed sessions without the expiry notice', () => {
    const controls = controlsFor(
      view({ phase: 'completed', outcome: 'all_pass', suite: suite(3), report: report(3, 3) }),
    );
    expect(controls.produceSuite).toBe(false);
    expect(controls.askFunction).toBe(false);
    expect(controls.showExpiryNotice).toBe(false);
  });

  it('offers advice only when the latest report has failures', () => {
    const failing = view({ phase: 'executed', suite: suite(3), report: report(1, 3) });
    expect(controlsFor(failing).advice).toBe(true);
    const passing = view({ phase: 'completed', suite: suite(3), report: report(3, 3) });
    expect(controlsFor(passing).advice).toBe(false);
  });

  it('suppresses all controls while a request is pending', () => {
    const controls = controlsFor(view({ phase: 'curating', suite: suite(2) }), true);
    expect(controls.produceSuite).toBe(false);
    expect(controls.askFunction).toBe(false);
  });
});

describe('formatCountdown', () => {
  it('formats minutes and seconds', () => {
    expect(formatCountdown(125)).toBe('02:05');
  });
  it('never renders negative time', () => {
    expect(formatCountdown(-10)).toBe('00:00');
  });
});

describe('passRateLabel', () => {
  it('rounds to whole percent', () => {
    expect(passRateLabel(report(7, 10))).toBe('70%');
    expect(passRateLabel(report(3, 3))).toBe('100%');
  });
});
