import { afterEach, describe, expect, it, vi } from "vitest";

import { ApiError, SessionApi, type Snapshot } from "../src/api.js";

function jsonResponse(status: number, body: unknown, statusText = "") {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText,
    json: async () => body,
  };
}

function textResponse(status: number, statusText: string) {
  return {
    ok: false,
    status,
    statusText,
    json: async () => {
      throw new SyntaxError("not json");
    },
  };
}

const snapshot: Snapshot = {
  id: "abc123",
  policy: "rule",
  scene_id: "scene_000",
  width: 64,
  height: 64,
  goal: { intent: "adjust", attribute: "brightness", adjust_value: -20, object: "dog" },
  transcript: [],
  image: "aW1n",
  overlays: [],
  turns: 0,
  max_turns: 10,
  done: false,
  success: false,
};

afterEach(() => {
  vi.unstubAllGlobals();
});

describe("SessionApi", () => {
  it("posts a create request as JSON and parses the snapshot", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse(200, snapshot));
    vi.stubGlobal("fetch", fetchMock);
    const api = new SessionApi();
    const got = await api.createSession({ policy: "rule", scene_id: "scene_000", seed: 7 });
    expect(got).toEqual(snapshot);
    expect(fetchMock).toHaveBeenCalledOnce();
    const [url, init] = fetchMock.mock.calls[0];
    expect(url).toBe("/sessions");
    expect(init.method).toBe("POST");
    expect(init.headers["Content-Type"]).toBe("application/json");
    expect(JSON.parse(init.body)).toEqual({ policy: "rule", scene_id: "scene_000", seed: 7 });
  });

  it("prefixes a configured base URL", async () => {
    const fetchMock = vi.fn().mockResolvedValue(jsonResponse(200, { policies: [], scene_ids: [], iou_threshold: 0.5, max_turns: 10 }));
    vi.stubGlobal("fetch", fetchMock);
    await new SessionApi("http://localhost:8000").meta();
    expect(fetchMock.mock.calls[0][0]).toBe("http://localhost:8000/meta");
  });

  it("raises ApiError with the service detail on failure", async () => {
    vi.stubGlobal(
      "fetch",
      vi.fn().mockResolvedValue(jsonResponse(400, { detail: "dqn policy needs a checkpoint path" })),
    );
    const api = new SessionApi();
    const err = await api.createSession({ policy: "dqn" }).catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(400);
    expect((err as ApiError).message).toBe("dqn policy needs a checkpoint path");
  });

  it("falls back to the status line when the error body is not JSON", async () => {
    vi.stubGlobal("fetch", vi.fn().mockResolvedValue(textResponse(502, "Bad Gateway")));
    const err = await new SessionApi().meta().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(502);
    expect((err as ApiError).message).toBe("502 Bad Gateway");
  });

  it("routes events and deletes to the session path", async () => {
    const fetchMock = vi
      .fn()
      .mockResolvedValueOnce(jsonResponse(200, { ...snapshot, turns: 1 }))
      .mockResolvedValueOnce(jsonResponse(200, { deleted: "abc123" }));
    vi.stubGlobal("fetch", fetchMock);
    const api = new SessionApi();
    await api.sendEvent("abc123", { type: "click", x: 3, y: 4 });
    await api.deleteSession("abc123");
    expect(fetchMock.mock.calls[0][0]).toBe("/sessions/abc123/event");
    expect(JSON.parse(fetchMock.mock.calls[0][1].body)).toEqual({ type: "click", x: 3, y: 4 });
    expect(fetchMock.mock.calls[1][0]).toBe("/sessions/abc123");
    expect(fetchMock.mock.calls[1][1].method).toBe("DELETE");
  });
});
