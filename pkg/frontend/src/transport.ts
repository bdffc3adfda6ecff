// Thin WebSocket binding.  The socket factory is injectable so tests can
// drive a Session without a browser or a server.

import { Session } from "./session.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export function connectSession(
  url: string,
  makeSocket: (url: string) => SocketLike = (u) =>
    new WebSocket(u) as unknown as SocketLike,
  clock: () => number = () => Date.now(),
): { session: Session; socket: SocketLike } {
  let socket!: SocketLike;
  const session = new Session({ send: (d) => socket.send(d) }, clock);
  socket = makeSocket(url);
  socket.onopen = () => session.onOpen();
  socket.onclose = () => session.onClose();
  socket.onerror = () => session.onClose();
  socket.onmessage = (ev) => {
    if (typeof ev.data === "string") session.onMessage(ev.data);
  };
  return { session, socket };
}
