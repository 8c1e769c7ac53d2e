// Page controller: one session per tab, one system action per user event.
// All mutable state sits in a single ViewState; every change re-renders
// from the latest service snapshot so the page never drifts from the
// server's transcript.

import { ApiError, SessionApi, type CreateRequest, type UserEvent } from "./api.js";
import { clientToImage, dragToBox, geometryOf, type ClientPoint } from "./coords.js";
import {
  describeGoal,
  drawScene,
  renderBanner,
  renderTranscript,
  showToast,
  type GestureMode,
  type ViewState,
} from "./view.js";

interface AppElements {
  policy: HTMLSelectElement;
  checkpoint: HTMLInputElement;
  scene: HTMLSelectElement;
  seed: HTMLInputElement;
  start: HTMLButtonElement;
  end: HTMLButtonElement;
  goal: HTMLElement;
  chatList: HTMLElement;
  chatForm: HTMLFormElement;
  chatInput: HTMLInputElement;
  send: HTMLButtonElement;
  modeButtons: Record<GestureMode, HTMLButtonElement>;
  canvas: HTMLCanvasElement;
  wrap: HTMLElement;
  preview: HTMLElement;
  banner: HTMLElement;
  toast: HTMLElement;
  turns: HTMLElement;
}

export interface AppController {
  state: ViewState;
  /** Resolves when every queued operation (boot included) has settled. */
  idle(): Promise<void>;
}

function grab<T extends HTMLElement>(root: Document, id: string): T {
  const el = root.querySelector(`#${id}`);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function fillSelect(select: HTMLSelectElement, values: string[], blankLabel?: string): void {
  select.innerHTML = "";
  if (blankLabel !== undefined) {
    const opt = document.createElement("option");
    opt.value = "";
    opt.textContent = blankLabel;
    select.appendChild(opt);
  }
  for (const value of values) {
    const opt = document.createElement("option");
    opt.value = value;
    opt.textContent = value;
    select.appendChild(opt);
  }
}

export function initApp(root: Document = document, api: SessionApi = new SessionApi()): AppController {
  const els: AppElements = {
    policy: grab<HTMLSelectElement>(root, "policy-select"),
    checkpoint: grab<HTMLInputElement>(root, "checkpoint-input"),
    scene: grab<HTMLSelectElement>(root, "scene-select"),
    seed: grab<HTMLInputElement>(root, "seed-input"),
    start: grab<HTMLButtonElement>(root, "start-button"),
    end: grab<HTMLButtonElement>(root, "end-button"),
    goal: grab(root, "goal-text"),
    chatList: grab(root, "chat-list"),
    chatForm: grab<HTMLFormElement>(root, "chat-form"),
    chatInput: grab<HTMLInputElement>(root, "chat-input"),
    send: grab<HTMLButtonElement>(root, "send-button"),
    modeButtons: {
      none: grab<HTMLButtonElement>(root, "mode-none"),
      click: grab<HTMLButtonElement>(root, "mode-click"),
      box: grab<HTMLButtonElement>(root, "mode-box"),
    },
    canvas: grab<HTMLCanvasElement>(root, "scene-canvas"),
    wrap: grab(root, "canvas-wrap"),
    preview: grab(root, "drag-preview"),
    banner: grab(root, "banner"),
    toast: grab(root, "toast"),
    turns: grab(root, "turn-counter"),
  };

  const state: ViewState = { snapshot: null, mode: "none", busy: false };
  let pending: Promise<void> = Promise.resolve();
  let dragStart: ClientPoint | null = null;

  function locked(): boolean {
    return state.busy || state.snapshot === null || state.snapshot.done;
  }

  function render(): void {
    const snap = state.snapshot;
    els.goal.textContent = snap ? describeGoal(snap.goal) : "no session";
    renderTranscript(els.chatList, snap ? snap.transcript : []);
    renderBanner(els.banner, snap);
    els.turns.textContent = snap ? `${snap.turns}/${snap.max_turns}` : "0/0";
    if (snap) drawScene(els.canvas, snap);
    const lock = locked();
    els.chatInput.disabled = lock;
    els.send.disabled = lock;
    for (const mode of ["none", "click", "box"] as const) {
      const button = els.modeButtons[mode];
      button.disabled = lock;
      button.setAttribute("aria-pressed", String(mode === state.mode));
    }
    els.start.disabled = state.busy;
    els.end.disabled = state.busy || snap === null;
  }

  // Serialize operations: each user action queues behind the previous one,
  // and the busy flag keeps the form disabled while any is in flight.
  function track(work: () => Promise<void>): void {
    pending = pending.then(() => guarded(work));
  }

  async function guarded(work: () => Promise<void>): Promise<void> {
    if (state.busy) return;
    state.busy = true;
    render();
    try {
      await work();
    } catch (e) {
      if (!(e instanceof ApiError)) throw e;
      if (e.status === 409 && state.snapshot) {
        // Finished under us (another tab, server restart): resync.
        try {
          state.snapshot = await api.getSession(state.snapshot.id);
        } catch {
          state.snapshot = null;
        }
      }
      showToast(els.toast, e.message);
    } finally {
      state.busy = false;
      render();
    }
  }

  function startSession(): void {
    track(async () => {
      const body: CreateRequest = { policy: els.policy.value };
      const checkpoint = els.checkpoint.value.trim();
      if (checkpoint) body.checkpoint = checkpoint;
      if (els.scene.value) body.scene_id = els.scene.value;
      const seed = Number(els.seed.value);
      if (els.seed.value.trim() && Number.isFinite(seed)) body.seed = seed;
      state.snapshot = await api.createSession(body);
      location.hash = `session=${state.snapshot.id}`;
    });
  }

  function endSession(): void {
    track(async () => {
      const snap = state.snapshot;
      if (!snap) return;
      await api.deleteSession(snap.id);
      state.snapshot = null;
      location.hash = "";
    });
  }

  function submitEvent(event: UserEvent): void {
    const snap = state.snapshot;
    if (!snap || snap.done || state.busy) return;
    track(async () => {
      state.snapshot = await api.sendEvent(snap.id, event);
    });
  }

  function updatePreview(e: MouseEvent): void {
    if (!dragStart) return;
    const wrapRect = els.wrap.getBoundingClientRect();
    els.preview.style.left = `${Math.min(dragStart.clientX, e.clientX) - wrapRect.left}px`;
    els.preview.style.top = `${Math.min(dragStart.clientY, e.clientY) - wrapRect.top}px`;
    els.preview.style.width = `${Math.abs(e.clientX - dragStart.clientX)}px`;
    els.preview.style.height = `${Math.abs(e.clientY - dragStart.clientY)}px`;
  }

  els.start.addEventListener("click", startSession);
  els.end.addEventListener("click", endSession);

  els.chatForm.addEventListener("submit", (e) => {
    e.preventDefault();
    const text = els.chatInput.value.trim();
    if (!text || locked()) return;
    els.chatInput.value = "";
    submitEvent({ type: "utterance", text });
  });

  for (const mode of ["none", "click", "box"] as const) {
    els.modeButtons[mode].addEventListener("click", () => {
      state.mode = mode;
      render();
    });
  }

  els.canvas.addEventListener("click", (e) => {
    if (state.mode !== "click" || locked()) return;
    const point = clientToImage(geometryOf(els.canvas), e.clientX, e.clientY);
    submitEvent({ type: "click", x: point.x, y: point.y });
  });

  els.canvas.addEventListener("mousedown", (e) => {
    if (state.mode !== "box" || locked()) return;
    dragStart = { clientX: e.clientX, clientY: e.clientY };
    els.preview.hidden = false;
    updatePreview(e);
  });

  els.canvas.addEventListener("mousemove", (e) => {
    if (dragStart) updatePreview(e);
  });

  els.canvas.addEventListener("mouseup", (e) => {
    if (state.mode !== "box" || !dragStart) return;
    const box = dragToBox(geometryOf(els.canvas), dragStart, { clientX: e.clientX, clientY: e.clientY });
    dragStart = null;
    els.preview.hidden = true;
    submitEvent({ type: "box", ...box });
  });

  els.canvas.addEventListener("mouseleave", () => {
    dragStart = null;
    els.preview.hidden = true;
  });

  // Boot: populate the pickers and, if the URL names a session, pick it
  // back up so a refresh does not orphan the tab.
  track(async () => {
    const meta = await api.meta();
    fillSelect(els.policy, meta.policies);
    fillSelect(els.scene, meta.scene_ids, "random test scene");
    const match = /session=(\w+)/.exec(location.hash);
    if (match) {
      try {
        state.snapshot = await api.getSession(match[1]);
      } catch (e) {
        if (!(e instanceof ApiError)) throw e;
        location.hash = "";
      }
    }
  });
  render();

  return {
    state,
    idle: () => pending,
  };
}
