// Operator session state.  Deliberately stateless with respect to the
// world: everything shown is reconstructed from the latest snapshot, so a
// page reload recovers the full view from the next message.

import {
  AckBody,
  Command,
  HelloBody,
  Snapshot,
  TelemetryBody,
  parseServerMessage,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected";

export interface Transport {
  send(data: string): void;
}

export interface CommandLogEntry {
  at: number;
  command: Command;
  wire: string;
}

export const STALE_AFTER_MS = 1000;

export class Session {
  status: ConnectionStatus = "connecting";
  snapshot: Snapshot | null = null;
  hello: HelloBody | null = null;
  selected: number | null = null;
  commandLog: CommandLogEntry[] = [];
  errors: string[] = [];
  telemetry: TelemetryBody[] = [];
  /** last known parameter values per blimp id, seeded by hello, updated by acks */
  params = new Map<number, Map<string, number>>();
  private lastSnapshotAt = -Infinity;
  private ackListeners: Array<(ack: AckBody) => void> = [];

  constructor(
    private transport: Transport,
    private clock: () => number = () => Date.now(),
  ) {}

  onOpen(): void {
    this.status = "connected";
  }

  onClose(): void {
    this.status = "disconnected";
  }

  onMessage(raw: string): void {
    const msg = parseServerMessage(raw);
    if (!msg) return;
    switch (msg.kind) {
      case "snapshot":
        this.snapshot = msg.snapshot;
        this.lastSnapshotAt = this.clock();
        if (this.selected === null && msg.snapshot.blimps.length > 0) {
          this.selected = msg.snapshot.blimps[0].id;
        }
        break;
      case "hello":
        this.hello = msg.hello;
        for (const [id, kv] of Object.entries(msg.hello.params)) {
          this.params.set(Number(id), new Map(Object.entries(kv)));
        }
        break;
      case "ack": {
        const kv = this.params.get(msg.ack.id) ?? new Map();
        kv.set(msg.ack.key, msg.ack.value);
        this.params.set(msg.ack.id, kv);
        for (const fn of this.ackListeners) fn(msg.ack);
        break;
      }
      case "telemetry":
        this.telemetry.push(msg.telemetry);
        break;
      case "error":
        this.errors.push(msg.error);
        break;
    }
  }

  onAck(fn: (ack: AckBody) => void): void {
    this.ackListeners.push(fn);
  }

  /** Commands are disabled while disconnected. */
  canCommand(): boolean {
    return this.status === "connected";
  }

  /** One log entry per wire message, byte for byte. */
  send(command: Command): boolean {
    if (!this.canCommand()) return false;
    const wire = JSON.stringify(command);
    this.transport.send(wire);
    this.commandLog.push({ at: this.clock(), command, wire });
    return true;
  }

  stale(): boolean {
    return this.clock() - this.lastSnapshotAt > STALE_AFTER_MS;
  }

  selectBlimp(id: number): void {
    this.selected = id;
  }

  selectedBlimp() {
    if (this.snapshot === null || this.selected === null) return null;
    return this.snapshot.blimps.find((b) => b.id === this.selected) ?? null;
  }
}
