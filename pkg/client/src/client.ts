/**
 * TCP client for the environment protocol.
 *
 * One RemoteEnv owns one connection and one server-side environment. The
 * server answers requests strictly in order, so replies are matched to
 * callers FIFO. Lifecycle misuse (step before reset, step after done) is
 * rejected locally without touching the wire, matching server behaviour.
 */
import * as net from "net";
import { once } from "events";

import { ConnectionClosedError, ProtocolError } from "./errors.js";
import {
  AgentAction,
  Metrics,
  Observation,
  PROTOCOL_VERSION,
  Request,
  Response,
  decodeObservation,
  encodeAction,
} from "./messages.js";
import { LineSplitter, encodeLine } from "./ndjson.js";

export interface StepResult {
  observation: Observation;
  reward: number;
  reward_terms: Record<string, number>;
  done: boolean;
  done_reason: string | null;
  /** Episode metrics; present only on the final step. */
  metrics: Metrics | null;
}

interface Pending {
  resolve: (resp: Response) => void;
  reject: (err: Error) => void;
}

export class RemoteEnv {
  private readonly socket: net.Socket;
  private readonly splitter = new LineSplitter();
  private readonly pending: Pending[] = [];
  private closed = false;
  private envId = 0;
  private started = false;
  private episodeDone = false;

  private constructor(socket: net.Socket) {
    this.socket = socket;
    socket.setEncoding("utf8");
    socket.on("data", chunk => this.onData(chunk as unknown as string));
    socket.on("error", err => this.fail(new ConnectionClosedError(err.message)));
    socket.on("close", () => this.fail(new ConnectionClosedError("connection closed")));
  }

  /**
   * Connect and create one environment on the server.
   *
   * `config` is a partial override merged onto the server's default
   * configuration (same shape as the JSON config file).
   */
  static async connect(
    host: string,
    port: number,
    config?: Record<string, unknown>,
  ): Promise<RemoteEnv> {
    const socket = net.createConnection({ host, port });
    await once(socket, "connect");
    const env = new RemoteEnv(socket);
    const req: Request = { cmd: "make" };
    if (config !== undefined) req.config = config;
    try {
      const resp = await env.call(req);
      if (resp.version !== PROTOCOL_VERSION) {
        throw new ProtocolError(
          `server protocol ${JSON.stringify(resp.version)}, ` +
            `client expects ${JSON.stringify(PROTOCOL_VERSION)}`,
        );
      }
      if (typeof resp.env_id !== "number") {
        throw new ProtocolError("make reply carries no env_id");
      }
      env.envId = resp.env_id;
    } catch (err) {
      env.dispose();
      throw err;
    }
    return env;
  }

  get id(): number {
    return this.envId;
  }

  /** True once the current episode has terminated. */
  get done(): boolean {
    return this.episodeDone;
  }

  async ping(): Promise<void> {
    await this.call({ cmd: "ping" });
  }

  async reset(seed: number): Promise<Observation> {
    if (!Number.isInteger(seed)) {
      throw new ProtocolError(`seed must be an integer, got ${seed}`);
    }
    const resp = await this.call({ cmd: "reset", env_id: this.envId, seed });
    if (resp.observation === undefined) {
      throw new ProtocolError("reset reply carries no observation");
    }
    this.started = true;
    this.episodeDone = false;
    return decodeObservation(resp.observation);
  }

  async step(action: AgentAction = null): Promise<StepResult> {
    if (!this.started) {
      throw new ProtocolError("reset() before step()");
    }
    if (this.episodeDone) {
      throw new ProtocolError("episode is over; call reset() first");
    }
    const resp = await this.call({
      cmd: "step",
      env_id: this.envId,
      action: encodeAction(action),
    });
    if (
      resp.observation === undefined ||
      typeof resp.reward !== "number" ||
      resp.reward_terms === undefined ||
      typeof resp.done !== "boolean"
    ) {
      throw new ProtocolError("step reply is missing fields");
    }
    this.episodeDone = resp.done;
    return {
      observation: decodeObservation(resp.observation),
      reward: resp.reward,
      reward_terms: resp.reward_terms,
      done: resp.done,
      done_reason: resp.done_reason ?? null,
      metrics: resp.metrics ?? null,
    };
  }

  /** Release the server-side environment and drop the connection. */
  async close(): Promise<void> {
    if (this.closed) return;
    try {
      await this.call({ cmd: "close", env_id: this.envId });
    } catch {
      // transport already gone: nothing left to release
    }
    this.dispose();
  }

  // -- plumbing ------------------------------------------------------------

  private async call(msg: Request): Promise<Response> {
    const resp = await this.request(msg);
    if (!resp.ok) {
      throw new ProtocolError(resp.error ?? "server reported an error");
    }
    return resp;
  }

  private request(msg: Request): Promise<Response> {
    if (this.closed) {
      return Promise.reject(new ConnectionClosedError("client is closed"));
    }
    return new Promise<Response>((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.socket.write(encodeLine(msg));
    });
  }

  private onData(chunk: string): void {
    for (const line of this.splitter.push(chunk)) {
      const waiter = this.pending.shift();
      if (waiter === undefined) continue;
      let parsed: Response;
      try {
        parsed = JSON.parse(line) as Response;
      } catch {
        waiter.reject(
          new ProtocolError(`server sent unparseable line: ${line.slice(0, 120)}`),
        );
        continue;
      }
      waiter.resolve(parsed);
    }
  }

  private fail(err: Error): void {
    if (this.closed) return;
    this.closed = true;
    while (this.pending.length > 0) {
      this.pending.shift()!.reject(err);
    }
    this.socket.destroy();
  }

  private dispose(): void {
    this.closed = true;
    this.socket.end();
    this.socket.destroy();
    this.socket.unref();
  }
}
