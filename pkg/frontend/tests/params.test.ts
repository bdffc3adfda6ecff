import { describe, expect, it } from "vitest";
import { ACK_TIMEOUT_MS, ParamEditor } from "../src/params.js";
import { Session } from "../src/session.js";

function setup() {
  const sent: string[] = [];
  let now = 0;
  const session = new Session({ send: (d) => sent.push(d) }, () => now);
  session.onOpen();
  session.onMessage(JSON.stringify({
    hello: { n_blimps: 1, speed: 1,
             params: { "0": { "ctl.k": 0.8, "ctl.kd": 1.2 } } },
  }));
  const editor = new ParamEditor(session, () => now);
  return { session, editor, sent, tick: (ms: number) => { now += ms; } };
}

describe("ParamEditor", () => {
  it("lists known keys with current values", () => {
    const { editor } = setup();
    expect(editor.knownParams(0)).toEqual([["ctl.k", 0.8], ["ctl.kd", 1.2]]);
  });

  it("walks pending -> acked and updates the shown value", () => {
    const { session, editor } = setup();
    const edit = editor.edit(0, "ctl.k", 1.0)!;
    expect(edit.status).toBe("pending");
    session.onMessage(JSON.stringify(
      { ack: { id: 0, key: "ctl.k", value: 1.0, ok: true } }));
    expect(edit.status).toBe("acked");
    expect(editor.knownParams(0)).toContainEqual(["ctl.k", 1.0]);
    expect(editor.statusOf(0, "ctl.k")).toBe("acked");
  });

  it("flags a timeout badge after the retry budget passes unacked", () => {
    const { editor, tick } = setup();
    const edit = editor.edit(0, "ctl.k", 1.0)!;
    tick(ACK_TIMEOUT_MS - 1);
    editor.sweep();
    expect(edit.status).toBe("pending");
    tick(10);
    editor.sweep();
    expect(edit.status).toBe("timeout");
  });

  it("a late ack does not resurrect a timed-out edit", () => {
    const { session, editor, tick } = setup();
    const edit = editor.edit(0, "ctl.k", 1.0)!;
    tick(ACK_TIMEOUT_MS + 10);
    editor.sweep();
    session.onMessage(JSON.stringify(
      { ack: { id: 0, key: "ctl.k", value: 1.0, ok: true } }));
    expect(edit.status).toBe("timeout");
    // the value table still reflects what the vehicle reports
    expect(editor.knownParams(0)).toContainEqual(["ctl.k", 1.0]);
  });

  it("restored values appear after a simulated server restart", () => {
    // a fresh session (new page, new server hello) shows the stored value
    const { session } = setup();
    session.onMessage(JSON.stringify({
      hello: { n_blimps: 1, speed: 1, params: { "0": { "ctl.k": 1.0 } } },
    }));
    const editor = new ParamEditor(session);
    expect(editor.knownParams(0)).toContainEqual(["ctl.k", 1.0]);
  });

  it("refuses to edit while disconnected", () => {
    const { session, editor } = setup();
    session.onClose();
    expect(editor.edit(0, "ctl.k", 2.0)).toBeNull();
    expect(editor.edits).toHaveLength(0);
  });
});
