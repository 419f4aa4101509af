import { describe, expect, it } from "vitest";

import { ApiClient, FetchFn } from "../src/api.js";
import { ViewState } from "../src/state.js";

function b64(bytes: Uint8Array): string {
  return btoa(String.fromCharCode(...bytes));
}

interface Recorded {
  url: string;
  method: string;
  body: string | undefined;
}

function recordingFetch(
  scores: Uint8Array,
  log: Recorded[],
  gate?: () => Promise<void>,
): FetchFn {
  return async (url, init) => {
    log.push({ url, method: init?.method ?? "GET", body: init?.body as string | undefined });
    if (gate) {
      await gate();
    }
    return new Response(
      JSON.stringify({ scores_u8: b64(scores), min: -1, max: 1, stride: 1 }),
      { status: 200, headers: { "content-type": "application/json" } },
    );
  };
}

describe("query flow", () => {
  it("repaints from the response bytes and appends to history", async () => {
    const log: Recorded[] = [];
    const painted: Uint8Array[] = [];
    const state = new ViewState(
      new ApiClient("http://svc", recordingFetch(new Uint8Array([255, 0, 128]), log)),
      "demo",
      1,
      { onHeatmap: (s) => painted.push(s) },
    );
    expect(await state.runQuery("soft")).toBe(true);
    expect(state.mode).toBe("heatmap");
    expect(Array.from(state.scores!)).toEqual([255, 0, 128]);
    expect(painted.length).toBe(1);
    expect(state.history).toEqual([{ text: "soft", stride: 1 }]);
  });

  it("sends nothing for an empty query box", async () => {
    const log: Recorded[] = [];
    const state = new ViewState(
      new ApiClient("http://svc", recordingFetch(new Uint8Array([1]), log)),
      "demo",
      1,
    );
    expect(await state.runQuery("")).toBe(false);
    expect(await state.runQuery("   ")).toBe(false);
    expect(log.length).toBe(0);
    expect(state.history.length).toBe(0);
  });

  it("replaying history issues a request identical to the original", async () => {
    const log: Recorded[] = [];
    const state = new ViewState(
      new ApiClient("http://svc", recordingFetch(new Uint8Array([9]), log)),
      "demo",
      2,
    );
    await state.runQuery("yellow egg-shaped vase");
    await state.replay(0);
    expect(log.length).toBe(2);
    expect(log[1]).toEqual(log[0]);
    // history is append-only: the replay added a new entry
    expect(state.history.length).toBe(2);
    expect(state.history[1]).toEqual(state.history[0]);
  });

  it("drops stale responses when a newer query is in flight", async () => {
    const log: Recorded[] = [];
    let releaseFirst!: () => void;
    const firstGate = new Promise<void>((resolve) => (releaseFirst = resolve));
    let call = 0;
    const fetchFn: FetchFn = async (url, init) => {
      log.push({ url, method: init?.method ?? "GET", body: init?.body as string });
      const mine = ++call;
      if (mine === 1) {
        await firstGate; // the first response arrives after the second
        return new Response(
          JSON.stringify({ scores_u8: b64(new Uint8Array([11])), stride: 1 }),
          { status: 200 },
        );
      }
      return new Response(
        JSON.stringify({ scores_u8: b64(new Uint8Array([22])), stride: 1 }),
        { status: 200 },
      );
    };
    const painted: number[][] = [];
    const state = new ViewState(new ApiClient("http://svc", fetchFn), "demo", 1, {
      onHeatmap: (s) => painted.push(Array.from(s)),
    });
    const first = state.runQuery("first");
    const second = state.runQuery("second");
    expect(await second).toBe(true);
    releaseFirst();
    expect(await first).toBe(false); // superseded, result discarded
    expect(painted).toEqual([[22]]);
    expect(Array.from(state.scores!)).toEqual([22]);
  });

  it("surfaces server error bodies verbatim and flags offline", async () => {
    const errors: string[] = [];
    let offline = 0;
    const fetchFn: FetchFn = async (url) => {
      if (url.includes("/segment")) {
        return new Response('{"detail": "unknown prompt(s): \'zzz\'"}', { status: 400 });
      }
      throw new TypeError("fetch failed");
    };
    const state = new ViewState(new ApiClient("http://svc", fetchFn), "demo", 1, {
      onError: (m) => errors.push(m),
      onOffline: () => offline++,
    });
    expect(await state.runQuery("anything")).toBe(false);
    expect(offline).toBe(1);
    expect(await state.segmentView(["zzz"])).toBe(false);
    expect(errors.length).toBe(1);
    expect(errors[0]).toContain("zzz");
  });
});

describe("segmentation flow", () => {
  it("paints categorical labels and keeps the request's legend order", async () => {
    const labels = new Uint16Array([0, 1, 0xffff]);
    const fetchFn: FetchFn = async (_url, init) => {
      const req = JSON.parse(init?.body as string);
      return new Response(
        JSON.stringify({
          labels_u16: b64(new Uint8Array(labels.buffer)),
          legend: req.labels,
          stride: 1,
        }),
        { status: 200 },
      );
    };
    const seen: string[][] = [];
    const state = new ViewState(new ApiClient("http://svc", fetchFn), "demo", 1, {
      onSegmentation: (_l, legend) => seen.push(legend),
    });
    expect(await state.segmentView(["wall", "floor"], true)).toBe(true);
    expect(state.mode).toBe("segmentation");
    expect(seen).toEqual([["wall", "floor"]]);
    expect(Array.from(state.labels!)).toEqual([0, 1, 0xffff]);
  });
});
