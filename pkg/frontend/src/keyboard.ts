/**
 * Keyboard bindings: one key per verdict (a = accept, r = reject).
 * Keystrokes typed into inputs or editable regions are never captured.
 */

export interface VerdictActions {
  accept: () => void;
  reject: () => void;
}

export interface KeyEventLike {
  key: string;
  target?: unknown;
  preventDefault?: () => void;
}

function isTypingTarget(target: unknown): boolean {
  if (!target || typeof target !== "object") {
    return false;
  }
  const el = target as { tagName?: string; isContentEditable?: boolean };
  return el.tagName === "INPUT" || el.tagName === "TEXTAREA" || el.isContentEditable === true;
}

export function makeKeyHandler(actions: VerdictActions): (event: KeyEventLike) => void {
  return (event) => {
    if (isTypingTarget(event.target)) {
      return;
    }
    if (event.key === "a" || event.key === "A") {
      event.preventDefault?.();
      actions.accept();
    } else if (event.key === "r" || event.key === "R") {
      event.preventDefault?.();
      actions.reject();
    }
  };
}

export function bindKeys(
  target: {
    addEventListener: (type: "keydown", fn: (e: KeyboardEvent) => void) => void;
    removeEventListener: (type: "keydown", fn: (e: KeyboardEvent) => void) => void;
  },
  actions: VerdictActions,
): () => void {
  const handler = makeKeyHandler(actions) as (e: KeyboardEvent) => void;
  target.addEventListener("keydown", handler);
  return () => target.removeEventListener("keydown", handler);
}
