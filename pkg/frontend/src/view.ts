/**
 * DOM rendering. The card mirrors the service item payload verbatim:
 * source question, answer (the intention), and the candidate under review,
 * plus progress and the running acceptance ratio.
 */

import { ControllerState } from "./controller.js";
import { SessionStats } from "./api.js";

export interface ViewHandlers {
  onAccept: (note: string) => void;
  onReject: (note: string) => void;
  onRetry: () => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function formatRatio(ratio: number | null): string {
  if (ratio === null) return "–";
  return `${(ratio * 100).toFixed(1)}%`;
}

export class ReviewView {
  private noteDraft = "";

  constructor(
    private readonly root: HTMLElement,
    private readonly handlers: ViewHandlers,
  ) {}

  render(state: ControllerState, stats: SessionStats | null): void {
    this.root.replaceChildren();
    this.root.appendChild(this.header(state, stats));

    switch (state.kind) {
      case "idle":
      case "loading":
        this.root.appendChild(el("p", "status", "加载中…"));
        break;
      case "error": {
        const banner = el("div", "banner error");
        banner.appendChild(el("p", undefined, `服务错误：${state.message}`));
        const retry = el("button", "retry", "重试");
        retry.addEventListener("click", () => this.handlers.onRetry());
        banner.appendChild(retry);
        this.root.appendChild(banner);
        break;
      }
      case "done": {
        const done = el("div", "done");
        done.appendChild(el("h2", undefined, "评审完成"));
        done.appendChild(
          el("p", "final-ratio", `最终通过率：${formatRatio(state.stats.acceptance_ratio)}`),
        );
        done.appendChild(
          el("p", undefined, `共 ${state.stats.total} 条：通过 ${state.stats.accepted}，拒绝 ${state.stats.rejected}`),
        );
        this.root.appendChild(done);
        break;
      }
      case "card":
      case "submitting": {
        const busy = state.kind === "submitting";
        const card = el("div", "card");
        card.appendChild(el("div", "label", "原问题"));
        card.appendChild(el("p", "source", state.card.sourceQuestion));
        card.appendChild(el("div", "label", "意图（答案）"));
        card.appendChild(el("p", "answer", state.card.answer));
        card.appendChild(el("div", "label", "候选问题"));
        card.appendChild(el("p", "candidate", state.card.candidate));

        const note = el("textarea", "note");
        note.placeholder = "备注（可选）";
        note.value = this.noteDraft;
        note.addEventListener("input", () => {
          this.noteDraft = note.value;
        });
        card.appendChild(note);

        const controls = el("div", "controls");
        const accept = el("button", "accept", "通过 (A)");
        const reject = el("button", "reject", "拒绝 (R)");
        accept.disabled = busy;
        reject.disabled = busy;
        accept.addEventListener("click", () => this.submit("accept"));
        reject.addEventListener("click", () => this.submit("reject"));
        controls.appendChild(accept);
        controls.appendChild(reject);
        card.appendChild(controls);
        this.root.appendChild(card);
        break;
      }
    }
  }

  private submit(verdict: "accept" | "reject"): void {
    const note = this.noteDraft;
    this.noteDraft = "";
    if (verdict === "accept") {
      this.handlers.onAccept(note);
    } else {
      this.handlers.onReject(note);
    }
  }

  takeNote(): string {
    const note = this.noteDraft;
    this.noteDraft = "";
    return note;
  }

  private header(state: ControllerState, stats: SessionStats | null): HTMLElement {
    const header = el("header");
    let progress = "";
    if (state.kind === "card" || state.kind === "submitting") {
      progress = `${state.card.position} / ${state.card.total}`;
    } else if (state.kind === "done") {
      progress = `${state.stats.total} / ${state.stats.total}`;
    }
    header.appendChild(el("span", "progress", progress));
    const ratio = stats ? stats.acceptance_ratio : null;
    header.appendChild(el("span", "ratio", `通过率 ${formatRatio(ratio)}`));
    return header;
  }
}
