/** DOM rendering and event wiring for the annotation session.
 *
 * The two option groups render exactly the labels the annotation protocol
 * defines (see state.ts); keys 1-4 pick the helpfulness option.
 */

import { Helpfulness } from "./api.js";
import {
  ACCEPTABILITY_LABELS,
  AnnotationSession,
  HELPFULNESS_LABELS,
  HELPFULNESS_ORDER,
  UiState,
} from "./state.js";

function el(html: string): HTMLElement {
  const template = document.createElement("template");
  template.innerHTML = html.trim();
  return template.content.firstElementChild as HTMLElement;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export class AnnotationView {
  constructor(
    private readonly root: HTMLElement,
    private readonly session: AnnotationSession,
  ) {
    session.subscribe(() => this.render(session.state));
    document.addEventListener("keydown", (event) => this.onKey(event));
    this.render(session.state);
  }

  private onKey(event: KeyboardEvent): void {
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) {
      return;
    }
    const index = "1234".indexOf(event.key);
    if (index >= 0) this.session.selectHelpfulnessByIndex(index);
  }

  render(state: UiState): void {
    this.root.innerHTML = "";
    if (state.errorBanner) {
      const banner = el(
        `<div class="banner error" role="alert">
           <span>${escapeHtml(state.errorBanner)}</span>
           <button id="retry-button">retry</button>
         </div>`,
      );
      banner.querySelector("#retry-button")!.addEventListener("click", () => {
        void this.session.loadNext();
      });
      this.root.appendChild(banner);
    }
    if (state.notice) {
      this.root.appendChild(
        el(`<div class="banner notice">${escapeHtml(state.notice)}</div>`),
      );
    }

    switch (state.screen) {
      case "login":
        this.renderLogin();
        break;
      case "loading":
        this.root.appendChild(el(`<p class="status">loading…</p>`));
        break;
      case "empty":
        this.renderEmpty();
        break;
      case "task":
        this.renderTask(state);
        break;
    }
    this.renderFooter(state);
  }

  private renderLogin(): void {
    const form = el(
      `<form id="login-form" class="login">
         <label for="annotator-input">Annotator id</label>
         <input id="annotator-input" autocomplete="username" />
         <button id="login-button" type="submit">Start annotating</button>
       </form>`,
    );
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      const input = form.querySelector("#annotator-input") as HTMLInputElement;
      void this.session.login(input.value);
    });
    this.root.appendChild(form);
  }

  private renderEmpty(): void {
    const box = el(
      `<div class="empty">
         <p>The queue is empty — nothing left to judge.</p>
         <button id="refresh-button">Check again</button>
       </div>`,
    );
    box.querySelector("#refresh-button")!.addEventListener("click", () => {
      void this.session.loadNext();
    });
    this.root.appendChild(box);
  }

  private renderTask(state: UiState): void {
    const task = state.task!;
    const panels = el(
      `<div class="task">
         <section class="prompt-box">
           <h2>Instruction</h2>
           <pre id="prompt-text">${escapeHtml(task.prompt)}</pre>
         </section>
         <div class="responses">
           <section class="response" id="panel-a">
             <h2>Output A</h2>
             <pre>${escapeHtml(task.response_a)}</pre>
             <fieldset class="acceptability" data-output="a">
               <legend>Acceptability</legend>
             </fieldset>
           </section>
           <section class="response" id="panel-b">
             <h2>Output B</h2>
             <pre>${escapeHtml(task.response_b)}</pre>
             <fieldset class="acceptability" data-output="b">
               <legend>Acceptability</legend>
             </fieldset>
           </section>
         </div>
         <fieldset id="helpfulness">
           <legend>Helpfulness <small>(keys 1–4)</small></legend>
         </fieldset>
         <button id="submit-button" type="button">Submit judgment</button>
       </div>`,
    );

    const acceptOptions: Array<{
      output: "a" | "b";
      value: boolean;
      label: string;
    }> = [
      { output: "a", value: true, label: ACCEPTABILITY_LABELS.a_acceptable },
      { output: "a", value: false, label: ACCEPTABILITY_LABELS.a_unacceptable },
      { output: "b", value: true, label: ACCEPTABILITY_LABELS.b_acceptable },
      { output: "b", value: false, label: ACCEPTABILITY_LABELS.b_unacceptable },
    ];
    for (const option of acceptOptions) {
      const fieldset = panels.querySelector(
        `fieldset[data-output="${option.output}"]`,
      )!;
      const id = `accept-${option.output}-${option.value}`;
      const current = option.output === "a" ? state.acceptA : state.acceptB;
      const wrapper = el(
        `<label class="option" for="${id}">
           <input type="radio" id="${id}" name="accept-${option.output}"
                  ${current === option.value ? "checked" : ""} />
           <span>${option.label}</span>
         </label>`,
      );
      wrapper.querySelector("input")!.addEventListener("change", () => {
        this.session.setAcceptability(option.output, option.value);
      });
      fieldset.appendChild(wrapper);
    }

    const helpfulness = panels.querySelector("#helpfulness")!;
    HELPFULNESS_ORDER.forEach((value: Helpfulness, index: number) => {
      const id = `helpfulness-${value}`;
      const wrapper = el(
        `<label class="option" for="${id}">
           <input type="radio" id="${id}" name="helpfulness"
                  ${state.helpfulness === value ? "checked" : ""} />
           <span class="key">${index + 1}</span>
           <span>${HELPFULNESS_LABELS[value]}</span>
         </label>`,
      );
      wrapper.querySelector("input")!.addEventListener("change", () => {
        this.session.selectHelpfulness(value);
      });
      helpfulness.appendChild(wrapper);
    });

    const submit = panels.querySelector("#submit-button") as HTMLButtonElement;
    submit.disabled = !this.session.canSubmit();
    submit.addEventListener("click", () => {
      void this.session.submit();
    });

    this.root.appendChild(panels);
  }

  private renderFooter(state: UiState): void {
    const bits: string[] = [];
    if (state.annotatorId) bits.push(`annotator: ${escapeHtml(state.annotatorId)}`);
    if (state.stats) bits.push(`queue: ${state.stats.open} open / ${state.stats.done} done`);
    bits.push(`submitted this session: ${state.submittedCount}`);
    this.root.appendChild(el(`<footer id="status-bar">${bits.join(" · ")}</footer>`));
  }
}
