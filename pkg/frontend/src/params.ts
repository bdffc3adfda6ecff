// Live parameter editing with acknowledgment tracking.  An edit is
// "pending" after send, "acked" once the ParamAck comes back (the blimp
// has already persisted it at that point), and "timeout" if the ack never
// arrives within the ground station's retry budget (5 tries, 100 ms
// apart) plus slack.

import { AckBody } from "./protocol.js";
import { Session } from "./session.js";

export type EditStatus = "pending" | "acked" | "timeout";

export interface ParamEdit {
  id: number;
  key: string;
  value: number;
  status: EditStatus;
  sentAt: number;
}

export const ACK_TIMEOUT_MS = 5 * 100 + 500;

export class ParamEditor {
  edits: ParamEdit[] = [];

  constructor(
    private session: Session,
    private clock: () => number = () => Date.now(),
  ) {
    session.onAck((ack) => this.onAck(ack));
  }

  /** Known keys with last known values for a blimp (hello + acks). */
  knownParams(id: number): Array<[string, number]> {
    const kv = this.session.params.get(id);
    return kv ? [...kv.entries()].sort((a, b) => a[0].localeCompare(b[0])) : [];
  }

  edit(id: number, key: string, value: number): ParamEdit | null {
    if (!this.session.send({ param_set: { id, key, value } })) return null;
    const e: ParamEdit = {
      id, key, value, status: "pending", sentAt: this.clock(),
    };
    this.edits.push(e);
    return e;
  }

  private onAck(ack: AckBody): void {
    for (const e of this.edits) {
      if (e.status === "pending" && e.id === ack.id && e.key === ack.key) {
        e.status = "acked";
        break;
      }
    }
  }

  /** Age out pending edits; call periodically. */
  sweep(): void {
    const now = this.clock();
    for (const e of this.edits) {
      if (e.status === "pending" && now - e.sentAt > ACK_TIMEOUT_MS) {
        e.status = "timeout";
      }
    }
  }

  statusOf(id: number, key: string): EditStatus | null {
    for (let i = this.edits.length - 1; i >= 0; i--) {
      const e = this.edits[i];
      if (e.id === id && e.key === key) return e.status;
    }
    return null;
  }
}
