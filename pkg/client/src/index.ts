export { RemoteEnv } from "./client.js";
export type { StepResult } from "./client.js";
export { ConnectionClosedError, ProtocolError } from "./errors.js";
export {
  PROTOCOL_VERSION,
  decodeAction,
  decodeDepth,
  decodeObservation,
  encodeAction,
  encodeDepth,
  encodeObservation,
} from "./messages.js";
export type {
  ActionPayload,
  AgentAction,
  ContinuousAction,
  Depth,
  DepthPayload,
  FrenetState,
  Metrics,
  Observation,
  ObservationPayload,
  Request,
  Response,
} from "./messages.js";
export { LineSplitter, encodeLine } from "./ndjson.js";
