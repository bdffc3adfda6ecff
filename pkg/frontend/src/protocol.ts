// Wire shapes spoken by `sim serve` over its WebSocket.  The server pushes
// snapshots at 10 Hz plus ack/telemetry/error events; the console sends
// single-key command objects.

export interface DetectionMsg {
  c: [number, number];
  n: number;
  valid: boolean;
}

export interface BlimpSnap {
  id: number;
  r: [number, number, number];
  euler: [number, number, number];
  mode: string;
  carrying: boolean;
  last_detection: DetectionMsg;
}

export interface BalloonSnap {
  id: number;
  r: [number, number, number];
  state: "free" | "captured" | "delivered";
}

export interface HoopSnap {
  id: number;
  shape: "triangle" | "rectangle" | "circle";
  r: [number, number, number];
  radius: number;
}

export interface Snapshot {
  t: number;
  blimps: BlimpSnap[];
  balloons: BalloonSnap[];
  hoops: HoopSnap[];
}

export interface HelloBody {
  n_blimps: number;
  speed: number;
  params: Record<string, Record<string, number>>;
}

export interface AckBody {
  id: number;
  key: string;
  value: number;
  ok: boolean;
}

export interface TelemetryBody {
  id: number;
  seq: number;
  h: number;
  psi: number;
  phi: number;
  theta: number;
  battery: number;
  mode: number;
  detection: DetectionMsg;
}

export type ServerMessage =
  | { kind: "snapshot"; snapshot: Snapshot }
  | { kind: "hello"; hello: HelloBody }
  | { kind: "ack"; ack: AckBody }
  | { kind: "telemetry"; telemetry: TelemetryBody }
  | { kind: "error"; error: string };

export type Command =
  | { set_mode: { id: number; mode: string } }
  | { manual: { id: number; forward: number; yaw_rate: number; climb: number } }
  | { param_set: { id: number; key: string; value: number } }
  | { telemetry_req: { id: number } };

export function parseServerMessage(raw: string): ServerMessage | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const d = doc as Record<string, unknown>;
  if (typeof d.t === "number" && Array.isArray(d.blimps)) {
    return { kind: "snapshot", snapshot: d as unknown as Snapshot };
  }
  if (d.hello) return { kind: "hello", hello: d.hello as HelloBody };
  if (d.ack) return { kind: "ack", ack: d.ack as AckBody };
  if (d.telemetry)
    return { kind: "telemetry", telemetry: d.telemetry as TelemetryBody };
  if (typeof d.error === "string") return { kind: "error", error: d.error };
  return null;
}

export const MODES = [
  "Manual",
  "RandomWalk",
  "MoveToGoal",
  "PassThroughGoal",
] as const;
