/** Error taxonomy mirroring the server side's split. */

/** Protocol-level failure: bad payload, server error reply, misuse of the API. */
export class ProtocolError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ProtocolError";
  }
}

/** Transport-level failure: connection refused, reset, or closed mid-request. */
export class ConnectionClosedError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConnectionClosedError";
  }
}
