/**
 * Wire message types and codecs.
 *
 * Field names mirror the server's JSON exactly (snake_case), so a decoded
 * message re-encodes to the same object. The only transformed field is the
 * depth image, which travels as base64-packed little-endian float32.
 */
import { ProtocolError } from "./errors.js";

export const PROTOCOL_VERSION = "offtersim/1";

export interface FrenetState {
  s: number;
  x_lat: number;
  theta: number;
  v: number;
  v_perp: number;
  omega: number;
  c: number;
}

export interface DepthPayload {
  shape: number[];
  b64: string;
}

/** Depth image in usable form: row-major float32 with its shape. */
export interface Depth {
  shape: number[];
  data: Float32Array;
}

export interface ObservationPayload {
  imu_accel: number[];
  imu_gyro: number[];
  roll: number;
  pitch: number;
  frenet: FrenetState;
  scandots: number[][] | null;
  depth: DepthPayload | null;
}

export interface Observation {
  imu_accel: number[];
  imu_gyro: number[];
  roll: number;
  pitch: number;
  frenet: FrenetState;
  scandots: number[][] | null;
  depth: Depth | null;
}

export interface ContinuousAction {
  steer: number;
  throttle: number;
  brake: number;
}

/** What callers pass to step(): nothing, a discrete index, or pedal values. */
export type AgentAction = ContinuousAction | number | null;

export type ActionPayload =
  | null
  | { index: number }
  | { steer: number; throttle: number; brake: number };

export interface Metrics {
  n_collisions: number;
  collision_time: number;
  progress: number;
  cumulative_unevenness: number;
  n_cbf_violations: number;
}

export interface Request {
  cmd: string;
  env_id?: number;
  seed?: number;
  action?: ActionPayload;
  config?: Record<string, unknown>;
}

export interface Response {
  ok: boolean;
  env_id?: number;
  version?: string;
  observation?: ObservationPayload;
  reward?: number;
  reward_terms?: Record<string, number>;
  done?: boolean;
  done_reason?: string | null;
  metrics?: Metrics;
  error?: string;
}

// -- depth ----------------------------------------------------------------

export function decodeDepth(payload: DepthPayload): Depth {
  const raw = Buffer.from(payload.b64, "base64");
  const count = payload.shape.reduce((a, b) => a * b, 1);
  if (raw.byteLength !== count * 4) {
    throw new ProtocolError(
      `depth payload is ${raw.byteLength} bytes, expected ${count * 4}`,
    );
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) data[i] = raw.readFloatLE(i * 4);
  return { shape: payload.shape.slice(), data };
}

export function encodeDepth(depth: Depth): DepthPayload {
  const buf = Buffer.alloc(depth.data.length * 4);
  for (let i = 0; i < depth.data.length; i++) {
    buf.writeFloatLE(depth.data[i], i * 4);
  }
  return { shape: depth.shape.slice(), b64: buf.toString("base64") };
}

// -- observation ----------------------------------------------------------

export function decodeObservation(payload: ObservationPayload): Observation {
  return {
    imu_accel: payload.imu_accel.slice(),
    imu_gyro: payload.imu_gyro.slice(),
    roll: payload.roll,
    pitch: payload.pitch,
    frenet: { ...payload.frenet },
    scandots:
      payload.scandots === null ? null : payload.scandots.map(row => row.slice()),
    depth: payload.depth === null ? null : decodeDepth(payload.depth),
  };
}

export function encodeObservation(obs: Observation): ObservationPayload {
  return {
    imu_accel: obs.imu_accel.slice(),
    imu_gyro: obs.imu_gyro.slice(),
    roll: obs.roll,
    pitch: obs.pitch,
    frenet: { ...obs.frenet },
    scandots:
      obs.scandots === null ? null : obs.scandots.map(row => row.slice()),
    depth: obs.depth === null ? null : encodeDepth(obs.depth),
  };
}

// -- action ---------------------------------------------------------------

export function encodeAction(action: AgentAction): ActionPayload {
  if (action === null) return null;
  if (typeof action === "number") {
    if (!Number.isInteger(action)) {
      throw new ProtocolError(`discrete action must be an integer, got ${action}`);
    }
    return { index: action };
  }
  return {
    steer: action.steer,
    throttle: action.throttle,
    brake: action.brake,
  };
}

/** Inverse of encodeAction; also accepts the bare-integer form the server does. */
export function decodeAction(payload: unknown): AgentAction {
  if (payload === null || payload === undefined) return null;
  if (typeof payload === "number") {
    if (!Number.isInteger(payload)) {
      throw new ProtocolError(`discrete action must be an integer, got ${payload}`);
    }
    return payload;
  }
  if (typeof payload === "object") {
    const rec = payload as Record<string, unknown>;
    if (typeof rec.index === "number" && Number.isInteger(rec.index)) {
      return rec.index;
    }
    if (typeof rec.steer === "number") {
      return {
        steer: rec.steer,
        throttle: typeof rec.throttle === "number" ? rec.throttle : 0,
        brake: typeof rec.brake === "number" ? rec.brake : 0,
      };
    }
  }
  throw new ProtocolError(`unrecognized action payload: ${JSON.stringify(payload)}`);
}
