/** Pure UI state & gating logic, kept DOM-free so it is unit-testable. */

import type { ReportView, SessionView } from './api.js';

export interface UiState {
  view: SessionView | null;
  pending: boolean;
  selectedTest: string | null;
  explanation: string | null;
  error: string | null;
}

export function initialState(): UiState {
  return { view: null, pending: false, selectedTest: null, explanation: null, error: null };
}

export interface ControlFlags {
  produceSuite: boolean;
  curation: boolean;
  askFunction: boolean;
  advice: boolean;
  showExpiryNotice: boolean;
}

export function isTerminal(view: SessionView): boolean {
  return view.phase === 'completed' || view.phase === 'expired';
}

/** Panel enablement mirrors the engine phase plus the live countdown. */
export function controlsFor(view: SessionView | null, pending = false): ControlFlags {
  if (view === null) {
    return { produceSuite: false, curation: false, askFunction: false, advice: false, showExpiryNotice: false };
  }
  const expired = view.phase === 'expired' || (view.remaining_budget_seconds <= 0 && view.phase !== 'completed');
  const mutable = !pending && !isTerminal(view) && !expired;
  const hasSuite = view.suite !== null && view.suite.tests.length > 0;
  return {
    produceSuite: mutable,
    curation: mutable && hasSuite,
    askFunction: mutable && hasSuite,
    advice: mutable && view.report !== null && !view.report.all_pass,
    showExpiryNotice: view.phase === 'expired' || expired,
  };
}

/** Countdown text for the remaining budget; never renders negative time. */
export function formatCountdown(remainingSeconds: number): string {
  const clamped = Math.max(0, Math.floor(remainingSeconds));
  const minutes = Math.floor(clamped / 60);
  const seconds = clamped % 60;
  return `${String(minutes).padStart(2, '0')}:${String(seconds).padStart(2, '0')}`;
}

export function passRateLabel(report: ReportView): string {
  if (report.total_count === 0) {
    return '0%';
  }
  return `${Math.round((report.pass_count / report.total_count) * 100)}%`;
}

export type Badge = 'pass' | 'fail';

export function badgeFor(outcome: string): Badge {
  return outcome === 'pass' ? 'pass' : 'fail';
}

export function phaseLabel(view: SessionView): string {
  if (view.phase === 'completed') {
    return 'Completed: all tests pass';
  }
  if (view.phase === 'expired') {
    return 'Time budget expired';
  }
  return view.phase.replace(/_/g, ' ');
}
