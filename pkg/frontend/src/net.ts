// WebSocket session with the bridge: hello handshake, inbound dispatch, and a
// paced command sender (latest draft wins, never more than the send rate).

import {
  CommandDraft,
  Frame,
  HelloFrame,
  PROTOCOL_VERSION,
  clientHello,
  commandFrame,
  decodeFrame,
  encodeFrame,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export interface ClientCallbacks {
  onHello?(frame: HelloFrame): void;
  onState?(frame: Frame): void;
  onError?(message: string): void;
  onClose?(): void;
}

export const COMMAND_RATE_HZ = 30;

export class BridgeClient {
  private socket: SocketLike | null = null;
  private cmdSeq = 0;
  private timer: ReturnType<typeof setInterval> | null = null;
  private draftProvider: (() => CommandDraft) | null = null;
  private dirty = false;
  handshakeDone = false;

  constructor(private callbacks: ClientCallbacks) {}

  attach(socket: SocketLike): void {
    this.socket = socket;
    socket.onopen = () => {
      socket.send(encodeFrame(clientHello()));
    };
    socket.onmessage = (ev) => {
      let frame: Frame;
      try {
        frame = decodeFrame(String(ev.data));
      } catch (e) {
        this.callbacks.onError?.(`bad frame from server: ${e}`);
        return;
      }
      if (frame.kind === "hello") {
        if (frame.protocol !== PROTOCOL_VERSION) {
          this.callbacks.onError?.(
            `protocol mismatch: server ${frame.protocol}, client ${PROTOCOL_VERSION}`);
          socket.close();
          return;
        }
        this.handshakeDone = true;
        this.callbacks.onHello?.(frame);
      } else if (frame.kind === "state") {
        this.callbacks.onState?.(frame);
      } else if (frame.kind === "error") {
        this.callbacks.onError?.(frame.message);
      }
    };
    socket.onclose = () => {
      this.stopSending();
      this.callbacks.onClose?.();
    };
    socket.onerror = () => {
      this.callbacks.onError?.("socket error");
    };
  }

  /** Commands flow only while connected and only at the configured cadence. */
  startSending(draftProvider: () => CommandDraft): void {
    this.draftProvider = draftProvider;
    this.dirty = true;
    if (this.timer !== null) return;
    this.timer = setInterval(() => this.sendNow(), 1000 / COMMAND_RATE_HZ);
  }

  markDirty(): void {
    this.dirty = true;
  }

  private sendNow(): void {
    if (!this.socket || !this.handshakeDone || !this.draftProvider) return;
    const draft = this.draftProvider();
    // Keep streaming while moving; skip sends only for an untouched draft.
    if (!this.dirty && draft.v_u === 0) return;
    this.dirty = false;
    this.cmdSeq += 1;
    this.socket.send(encodeFrame(commandFrame(draft, this.cmdSeq)));
  }

  stopSending(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  close(): void {
    this.stopSending();
    this.socket?.close();
  }
}
