import * as fs from "fs";
import * as path from "path";
import { fileURLToPath } from "url";

import { describe, expect, it } from "vitest";

import {
  ActionPayload,
  ObservationPayload,
  Request,
  Response,
  decodeAction,
  decodeDepth,
  decodeObservation,
  encodeAction,
  encodeDepth,
  encodeObservation,
} from "../src/messages.js";

const here = path.dirname(fileURLToPath(import.meta.url));
const corpusPath = path.join(here, "golden", "messages.jsonl");

interface CorpusRecord {
  dir: "request" | "response";
  line: string;
  lenient?: boolean;
}

function loadCorpus(): CorpusRecord[] {
  return fs
    .readFileSync(corpusPath, "utf8")
    .split("\n")
    .filter(l => l.length > 0)
    .map(l => JSON.parse(l) as CorpusRecord);
}

describe("depth codec", () => {
  it("round-trips float32 data exactly", () => {
    const data = new Float32Array([0, 1.5, -3.75, 30, 12.3456, 1e-7, 29.999998]);
    const out = decodeDepth(encodeDepth({ shape: [1, 7], data }));
    expect(out.shape).toStrictEqual([1, 7]);
    expect(Array.from(out.data)).toStrictEqual(Array.from(data));
  });

  it("rejects a payload whose bytes disagree with its shape", () => {
    const payload = encodeDepth({ shape: [2, 2], data: new Float32Array(4) });
    expect(() => decodeDepth({ ...payload, shape: [2, 3] })).toThrow(/bytes/);
  });
});

describe("action codec", () => {
  it("encodes the three caller-side forms", () => {
    expect(encodeAction(null)).toBeNull();
    expect(encodeAction(4)).toStrictEqual({ index: 4 });
    expect(
      encodeAction({ steer: -0.5, throttle: 0.25, brake: 0 }),
    ).toStrictEqual({ steer: -0.5, throttle: 0.25, brake: 0 });
  });

  it("rejects fractional discrete indices", () => {
    expect(() => encodeAction(1.5)).toThrow(/integer/);
  });

  it("accepts the bare-integer shorthand the server tolerates", () => {
    expect(decodeAction(2)).toBe(2);
    expect(decodeAction({ index: 2 })).toBe(2);
    expect(decodeAction(null)).toBeNull();
  });
});

describe("golden corpus", () => {
  const records = loadCorpus();

  it("holds a full scripted session", () => {
    expect(records.length).toBeGreaterThanOrEqual(30);
    expect(records.filter(r => r.dir === "request").length).toBe(
      records.filter(r => r.dir === "response").length,
    );
  });

  it("re-encodes every observation to the exact wire object", () => {
    let observations = 0;
    let depths = 0;
    for (const rec of records) {
      if (rec.dir !== "response") continue;
      const msg = JSON.parse(rec.line) as Response;
      if (msg.observation === undefined) continue;
      observations += 1;
      const payload = msg.observation as ObservationPayload;
      expect(encodeObservation(decodeObservation(payload))).toStrictEqual(payload);
      if (payload.depth !== null) {
        depths += 1;
        const depth = decodeDepth(payload.depth);
        expect(encodeDepth(depth).b64).toBe(payload.depth.b64);
        expect(depth.data.length).toBe(payload.depth.shape[0] * payload.depth.shape[1]);
      }
    }
    expect(observations).toBeGreaterThanOrEqual(8);
    expect(depths).toBeGreaterThanOrEqual(5);
  });

  it("re-encodes every canonical action to the exact wire object", () => {
    let actions = 0;
    for (const rec of records) {
      if (rec.dir !== "request" || rec.lenient) continue;
      const msg = JSON.parse(rec.line) as Request;
      if (!("action" in msg)) continue;
      actions += 1;
      const payload = msg.action as ActionPayload;
      expect(encodeAction(decodeAction(payload))).toStrictEqual(payload);
    }
    expect(actions).toBeGreaterThanOrEqual(5);
  });

  it("decodes the lenient variants the client itself never sends", () => {
    for (const rec of records) {
      if (rec.dir !== "request" || !rec.lenient) continue;
      let msg: unknown;
      try {
        msg = JSON.parse(rec.line);
      } catch {
        continue; // the deliberately malformed line
      }
      const action = (msg as Request).action;
      expect(decodeAction(action)).toBe(action);
    }
  });

  it("carries terminal metrics and the documented error replies", () => {
    const errors: string[] = [];
    let metricsSeen = 0;
    for (const rec of records) {
      if (rec.dir !== "response") continue;
      const msg = JSON.parse(rec.line) as Response;
      if (msg.error !== undefined) errors.push(msg.error);
      if (msg.metrics !== undefined) {
        metricsSeen += 1;
        expect(msg.done).toBe(true);
        expect(Object.keys(msg.metrics).sort()).toStrictEqual([
          "collision_time",
          "cumulative_unevenness",
          "n_cbf_violations",
          "n_collisions",
          "progress",
        ]);
      }
    }
    expect(metricsSeen).toBeGreaterThanOrEqual(1);
    expect(errors.some(e => /episode is over/.test(e))).toBe(true);
    expect(errors.some(e => /unknown env_id/.test(e))).toBe(true);
    expect(errors.some(e => /unknown cmd/.test(e))).toBe(true);
    expect(errors.some(e => /malformed JSON/.test(e))).toBe(true);
  });
});
