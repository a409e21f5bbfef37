import { beforeEach, describe, expect, it } from "vitest";

import type { AnnotationTask, ApiClient, SubmitResult } from "../src/api.js";
import { AnnotationSession } from "../src/state.js";
import { AnnotationView } from "../src/view.js";

const TASK: AnnotationTask = {
  task_id: 7,
  prompt: "Explain <tides>",
  response_a: "Because of the moon.",
  response_b: "Gravity & rotation.",
  status: "open",
};

class ViewFakeApi {
  queue: (AnnotationTask | null)[] = [TASK, null];
  submitted: unknown[] = [];

  async nextTask(): Promise<AnnotationTask | null> {
    return this.queue.length ? this.queue.shift()! : null;
  }

  async submitJudgment(): Promise<SubmitResult> {
    this.submitted.push(1);
    return { kind: "ok", record: {} as never };
  }

  async stats() {
    return { open: 1, done: 0, by_annotator: {} };
  }
}

function mount() {
  document.body.innerHTML = '<main id="app"></main>';
  const root = document.getElementById("app")!;
  const api = new ViewFakeApi();
  const session = new AnnotationSession(api as unknown as ApiClient);
  new AnnotationView(root, session);
  return { root, api, session };
}

async function loggedIn() {
  const ctx = mount();
  await ctx.session.login("viewer");
  return ctx;
}

describe("rendered option labels", () => {
  it("shows the four helpfulness options verbatim", async () => {
    const { root } = await loggedIn();
    const labels = [...root.querySelectorAll("#helpfulness .option span:last-child")]
      .map((n) => n.textContent);
    expect(labels).toEqual([
      "A is better",
      "B is better",
      "both A and B are good",
      "both A and B are not good",
    ]);
  });

  it("shows the four acceptability choices verbatim", async () => {
    const { root } = await loggedIn();
    const labels = [...root.querySelectorAll(".acceptability .option span:last-child")]
      .map((n) => n.textContent);
    expect(labels).toEqual([
      "A is acceptable",
      "A is unacceptable",
      "B is acceptable",
      "B is unacceptable",
    ]);
  });

  it("renders prompt and both outputs side by side", async () => {
    const { root } = await loggedIn();
    expect(root.querySelector("#prompt-text")!.textContent).toBe("Explain <tides>");
    expect(root.querySelector("#panel-a pre")!.textContent).toBe("Because of the moon.");
    expect(root.querySelector("#panel-b pre")!.textContent).toBe("Gravity & rotation.");
  });
});

describe("submit gating in the DOM", () => {
  it("submit stays disabled until a helpfulness option is chosen", async () => {
    const { root } = await loggedIn();
    const submit = root.querySelector("#submit-button") as HTMLButtonElement;
    expect(submit.disabled).toBe(true);

    (root.querySelector("#helpfulness-a_better") as HTMLInputElement).click();
    const after = root.querySelector("#submit-button") as HTMLButtonElement;
    expect(after.disabled).toBe(false);
  });

  it("acceptability alone does not enable submit", async () => {
    const { root } = await loggedIn();
    (root.querySelector("#accept-a-true") as HTMLInputElement).click();
    const submit = root.querySelector("#submit-button") as HTMLButtonElement;
    expect(submit.disabled).toBe(true);
  });

  it("keyboard shortcut 2 selects 'B is better'", async () => {
    const { root, session } = await loggedIn();
    document.dispatchEvent(new KeyboardEvent("keydown", { key: "2" }));
    expect(session.state.helpfulness).toBe("b_better");
    const radio = root.querySelector("#helpfulness-b_better") as HTMLInputElement;
    expect(radio.checked).toBe(true);
  });
});

describe("screens", () => {
  it("starts on the login screen", () => {
    const { root } = mount();
    expect(root.querySelector("#annotator-input")).not.toBeNull();
  });

  it("shows the empty-queue screen when no tasks remain", async () => {
    const ctx = mount();
    ctx.api.queue = [null];
    await ctx.session.login("viewer");
    expect(ctx.root.querySelector(".empty")).not.toBeNull();
    expect(ctx.root.textContent).toContain("queue is empty");
  });

  it("service failure shows the retry banner and keeps the task", async () => {
    const { root, api, session } = await loggedIn();
    api.nextTask = async () => {
      throw new Error("boom");
    };
    await session.loadNext();
    expect(root.querySelector(".banner.error")).not.toBeNull();
    expect(root.querySelector("#panel-a")).not.toBeNull();
  });
});
