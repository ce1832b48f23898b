/** Browser bootstrap: render loop, event delegation, 1 Hz state polling. */

import { ApiClient } from './api.js';
import { Gesture, WorkbenchController } from './controller.js';
import { renderWorkbench } from './view.js';

function gestureFrom(action: string, target: string): Gesture | null {
  switch (action) {
    case 'produce-suite':
      return { kind: 'produce-suite' };
    case 'explain-test':
      return { kind: 'explain-test', testId: target };
    case 'regenerate-test': {
      const guidance = window.prompt('Guidance for the regenerated test (optional):') ?? undefined;
      return { kind: 'regenerate-test', testId: target, guidance };
    }
    case 'delete-test':
      return { kind: 'delete-test', testId: target };
    case 'edit-test': {
      const body = window.prompt('Replacement test source (one test function):');
      return body ? { kind: 'edit-test', testId: target, body } : null;
    }
    case 'generate-function':
      return { kind: 'generate-function' };
    case 'generate-function-with-advice':
      return { kind: 'generate-function-with-advice' };
    case 'request-advice':
      return { kind: 'request-advice' };
    default:
      return null;
  }
}

/** Wire rendering + click delegation into a root element. */
export function attachWorkbench(root: HTMLElement, controller: WorkbenchController): void {
  const render = () => {
    root.innerHTML = renderWorkbench(controller.state);
  };
  controller.onChange(render);
  root.addEventListener('click', (event) => {
    const element = (event.target as HTMLElement).closest('button[data-action]');
    if (!(element instanceof HTMLButtonElement) || element.disabled) {
      return;
    }
    const gesture = gestureFrom(element.dataset.action ?? '', element.dataset.target ?? '');
    if (gesture !== null) {
      void controller.dispatch(gesture);
    }
  });
  // A focus landing on the function source counts as a view event.
  root.addEventListener('focusin', (event) => {
    const element = event.target as HTMLElement;
    if (element.dataset.role === 'function-source') {
      void controller.reportFunctionViewed();
    }
  });
  render();
}

async function bootstrap(): Promise<void> {
  const root = document.getElementById('app');
  if (root === null) {
    return;
  }
  const api = new ApiClient('');
  const controller = new WorkbenchController(api);
  attachWorkbench(root, controller);

  const params = new URLSearchParams(window.location.search);
  const existing = params.get('session');
  if (existing !== null) {
    controller.state.view = await api.getSession(existing);
  } else {
    const participant = params.get('participant') ?? `p-${Math.random().toString(36).slice(2, 8)}`;
    await controller.createSession({
      participant_id: participant,
      task_id: params.get('task_id') ?? undefined,
      task: (params.get('task') as 'evaluation' | 'warmup' | null) ?? undefined,
    });
  }

  window.setInterval(() => {
    void controller.refresh();
  }, 1000);
}

declare global {
  interface Window {
    __workbenchTest?: boolean;
  }
}

if (typeof document !== 'undefined' && !window.__workbenchTest) {
  void bootstrap();
}
