/** DOM wiring: three-card question screen, dendrogram panel, toasts. */

import { SessionController, ViewState } from "./state.js";
import { DendrogramError, renderSvg } from "./dendrogram.js";

export class UiShell {
  private selected = new Set<string>();

  constructor(
    private doc: Document,
    private controller: SessionController,
  ) {
    controller.onChange((s) => this.render(s));
  }

  bindSetupForm(): void {
    const form = this.doc.getElementById("setup-form") as HTMLFormElement;
    form.addEventListener("submit", (ev) => {
      ev.preventDefault();
      const raw = (this.doc.getElementById("elements-input") as HTMLInputElement).value;
      const elements = raw.split(",").map((s) => s.trim()).filter(Boolean);
      const mode = (this.doc.getElementById("mode-select") as HTMLSelectElement).value as "noiseless" | "noisy";
      const pRaw = (this.doc.getElementById("p-input") as HTMLInputElement).value;
      const p = mode === "noisy" && pRaw ? Number(pRaw) : undefined;
      this.controller.start(elements, mode, p).catch((err) => this.toast(String(err)));
      this.doc.getElementById("setup")!.classList.add("hidden");
    });
  }

  private toast(message: string): void {
    const box = this.doc.getElementById("toast")!;
    box.textContent = message;
    box.classList.remove("hidden");
    setTimeout(() => box.classList.add("hidden"), 4000);
  }

  private render(s: ViewState): void {
    if (s.error) this.toast(s.error);
    this.renderQuestion(s);
    this.renderTree(s);
  }

  private renderQuestion(s: ViewState): void {
    const panel = this.doc.getElementById("question")!;
    const cards = this.doc.getElementById("cards")!;
    const status = this.doc.getElementById("status")!;
    if (s.phase === "done") {
      panel.classList.add("hidden");
      status.textContent = `done in ${s.tree?.queries ?? "?"} questions`;
      return;
    }
    if (!s.triplet) {
      panel.classList.add("hidden");
      return;
    }
    panel.classList.remove("hidden");
    const busy = s.phase === "submitting";
    status.textContent = busy
      ? "submitting..."
      : `question ${1 + (s.tree?.queries ?? 0)}: pick the two most similar (${s.tree?.placed ?? "?"}/${s.tree?.total ?? "?"} placed)`;
    cards.innerHTML = "";
    for (const label of s.triplet) {
      const card = this.doc.createElement("button");
      card.className = "card" + (this.selected.has(label) ? " selected" : "");
      card.textContent = label;
      (card as HTMLButtonElement).disabled = busy;
      card.addEventListener("click", () => this.pick(label));
      cards.appendChild(card);
    }
  }

  private pick(label: string): void {
    if (this.selected.has(label)) {
      this.selected.delete(label);
    } else {
      this.selected.add(label);
    }
    if (this.selected.size === 2) {
      const pair = [...this.selected].sort() as [string, string];
      this.selected.clear();
      this.controller.answer(pair).catch((err) => this.toast(String(err)));
    } else {
      this.render(this.controller.snapshot());
    }
  }

  private renderTree(s: ViewState): void {
    const panel = this.doc.getElementById("dendrogram")!;
    const counter = this.doc.getElementById("query-counter")!;
    if (!s.tree) return;
    counter.textContent = `${s.tree.queries} questions asked`;
    try {
      panel.innerHTML = renderSvg(s.tree.json);
      panel.classList.toggle("fullscreen", s.phase === "done");
    } catch (err) {
      if (err instanceof DendrogramError) {
        panel.innerHTML = `<div class="error-panel">cannot draw tree: ${err.message}</div>`;
      } else {
        throw err;
      }
    }
  }
}
