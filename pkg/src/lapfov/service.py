"""Live-session bridge: runs the closed loop in real time over a TCP socket,
streaming state and frame snapshots to cockpit clients and accepting human
steering of the tool.

Wire protocol (v1): the client opens a TCP connection and sends a plain HTTP
handshake (``GET /v1 HTTP/1.1`` with an ``Upgrade: lapfov-sim`` header,
terminated by a blank line). The server answers ``101 Switching Protocols``
and from then on both sides exchange newline-delimited JSON messages.

Outbound messages (all carry a monotone ``seq``):
  hello   v1 tag, heatmap (base64 PGM), echoed settings
  state   t, e_p, e_d, e_r, theta_star, lyapunov, tip_px, target_px, d_tool,
          misorientation, camera_pose (12 numbers), settings, flags
  frame   quarter-resolution view as base64 PPM
  error   rejection notice for a malformed inbound message

Inbound messages:
  tool_drag {px: [u, v]} or {world: [x, y, z]} or {release: true}
  set_gain  {name: k_d | k_theta | kr | ks_insert, value > 0}
  set_mrc   {on: bool}
  pause / resume
  reset     {seed: int}

The simulation loop is the single owner of mutable state; client I/O runs on
separate threads and talks to the loop only through a bounded inbound queue
and per-client latest-wins outbound mailboxes (slow clients drop frames and
see sequence-number gaps, never stalling the loop).
"""

from __future__ import annotations

import base64
import json
import queue
import socket
import threading
import time
from dataclasses import replace

import numpy as np

from .controller import ControlGains
from .errors import InvariantViolation, PortUnavailable
from .images import ImageBuffer
from .scenario import ScenarioConfig, SimulationLoop, StepRecord
from .scene import render

PROTOCOL_TAG = "lapfov-sim"
PROTOCOL_VERSION = "v1"
GAIN_NAMES = ("k_d", "k_theta", "kr", "ks_insert")


def _ppm_base64(image: ImageBuffer) -> str:
    gray = np.clip(np.rint(image.gray() * 255.0), 0, 255).astype(np.uint8)
    h, w = gray.shape
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    payload = f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.tobytes()
    return base64.b64encode(payload).decode("ascii")


def _pgm_base64(values: np.ndarray) -> str:
    q = np.clip(np.rint(values / max(values.max(), 1e-12) * 255.0), 0, 255).astype(np.uint8)
    h, w = q.shape
    payload = f"P5\n{w} {h}\n255\n".encode("ascii") + q.tobytes()
    return base64.b64encode(payload).decode("ascii")


class _ClientMailbox:
    """Latest-wins slots for state/frame plus a reliable queue for one-shot
    messages; a writer thread drains it without ever blocking the sim loop."""

    def __init__(self):
        self._cond = threading.Condition()
        self._reliable: list = []
        self._state = None
        self._frame = None
        self.closed = False

    def offer(self, kind: str, payload: str) -> None:
        with self._cond:
            if self.closed:
                return
            if kind == "state":
                self._state = payload
            elif kind == "frame":
                self._frame = payload
            else:
                self._reliable.append(payload)
            self._cond.notify()

    def take(self):
        with self._cond:
            while not (self._reliable or self._state or self._frame or self.closed):
                self._cond.wait(timeout=0.5)
            if self.closed:
                return None
            if self._reliable:
                return self._reliable.pop(0)
            if self._state is not None:
                msg, self._state = self._state, None
                return msg
            msg, self._frame = self._frame, None
            return msg

    def close(self):
        with self._cond:
            self.closed = True
            self._cond.notify_all()


class SimService:
    """Serves one scenario session; see module docstring for the protocol."""

    def __init__(self, config: ScenarioConfig, host: str = "127.0.0.1",
                 port: int = 0, realtime: bool = True,
                 frame_every: int = 5, state_every: int = 1):
        self.config = config
        self.host = host
        self.requested_port = port
        self.realtime = realtime
        self.frame_every = max(1, frame_every)
        self.state_every = max(1, state_every)
        self.loop = SimulationLoop(config)
        self._inbound: queue.Queue = queue.Queue(maxsize=256)
        self._clients: dict = {}
        self._clients_lock = threading.Lock()
        self._seq = 0
        self._seq_lock = threading.Lock()
        self._stop = threading.Event()
        self._server_socket: socket.socket | None = None
        self._threads: list = []
        self.port: int | None = None
        self._frame_k = config.intrinsics.scaled(0.25)
        self._heatmap_b64 = _pgm_base64(self.loop.heatmap.values)
        self._last_record: StepRecord | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        try:
            srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            srv.bind((self.host, self.requested_port))
            srv.listen(8)
        except OSError as exc:
            raise PortUnavailable(f"cannot bind {self.host}:{self.requested_port}: {exc}") from exc
        self._server_socket = srv
        self.port = srv.getsockname()[1]
        accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        sim_thread = threading.Thread(target=self._sim_loop, daemon=True)
        self._threads = [accept_thread, sim_thread]
        accept_thread.start()
        sim_thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._server_socket is not None:
            try:
                self._server_socket.close()
            except OSError:
                pass
        with self._clients_lock:
            clients = list(self._clients.items())
        for sock, mailbox in clients:
            mailbox.close()
            try:
                sock.close()
            except OSError:
                pass

    def run_forever(self) -> None:
        self.start()
        try:
            while not self._stop.is_set():
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    # -- outbound ------------------------------------------------------------

    def _next_seq(self) -> int:
        with self._seq_lock:
            self._seq += 1
            return self._seq

    def _broadcast(self, kind: str, message: dict) -> None:
        message["seq"] = self._next_seq()
        payload = json.dumps(message, separators=(",", ":")) + "\n"
        with self._clients_lock:
            mailboxes = list(self._clients.values())
        for mailbox in mailboxes:
            mailbox.offer(kind, payload)

    def _send_to(self, mailbox: _ClientMailbox, message: dict) -> None:
        message["seq"] = self._next_seq()
        mailbox.offer("reliable", json.dumps(message, separators=(",", ":")) + "\n")

    def _settings_dict(self) -> dict:
        gains = self.loop.gains
        return {
            "mrc": self.loop.mrc_enabled,
            "paused": self.loop.paused,
            "gains": {
                "k_d": gains.k_d,
                "k_theta": gains.k_theta,
                "kr": float(gains.kr[0]),
                "ks_insert": float(gains.ks[0]),
            },
        }

    def _state_message(self, record: StepRecord) -> dict:
        return {
            "type": "state",
            "v": PROTOCOL_VERSION,
            "t": record.t,
            "e_p": [float(x) for x in record.e_p],
            "e_d": float(record.e_d),
            "e_r": [float(x) for x in record.e_r],
            "theta_star": float(record.theta_star),
            "lyapunov": float(record.lyapunov),
            "tip_px": [float(x) for x in record.tip_px],
            "target_px": [float(x) for x in record.target_px],
            "d_tool": float(record.d_tool),
            "misorientation": float(record.misorientation),
            "camera_pose": [float(x) for x in record.pose_row],
            "settings": self._settings_dict(),
            "flags": record.flags,
        }

    def _frame_message(self) -> dict:
        image, _, _ = render(self.loop.scene, self.loop.camera, self._frame_k)
        return {
            "type": "frame",
            "v": PROTOCOL_VERSION,
            "t": self.loop.t,
            "width": self._frame_k.width,
            "height": self._frame_k.height,
            "ppm_base64": _ppm_base64(image),
        }

    # -- simulation loop -----------------------------------------------------

    def _sim_loop(self) -> None:
        dt = self.config.dt
        next_deadline = time.monotonic()
        step_count = 0
        while not self._stop.is_set():
            self._drain_inbound()
            if not self.loop.paused:
                try:
                    self._last_record = self.loop.step()
                except InvariantViolation as exc:
                    self.loop.paused = True
                    self._broadcast("reliable", {
                        "type": "error", "v": PROTOCOL_VERSION,
                        "message": f"invariant violation: {exc}; session paused",
                    })
            step_count += 1
            if self._last_record is not None and step_count % self.state_every == 0:
                self._broadcast("state", self._state_message(self._last_record))
            if step_count % self.frame_every == 0:
                self._broadcast("frame", self._frame_message())
            if self.realtime:
                next_deadline += dt
                delay = next_deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_deadline = time.monotonic()

    def _drain_inbound(self) -> None:
        while True:
            try:
                mailbox, msg = self._inbound.get_nowait()
            except queue.Empty:
                return
            try:
                self._apply(msg)
            except (KeyError, ValueError, TypeError) as exc:
                self._send_to(mailbox, {
                    "type": "error", "v": PROTOCOL_VERSION,
                    "message": f"rejected {msg.get('type', '?')!r}: {exc}",
                })

    def _apply(self, msg: dict) -> None:
        kind = msg.get("type")
        if kind == "tool_drag":
            if msg.get("release"):
                self.loop.clear_drag()
                return
            if "px" in msg:
                u, v = float(msg["px"][0]), float(msg["px"][1])
                k = self.config.intrinsics
                if not (0 <= u < k.width and 0 <= v < k.height):
                    raise ValueError(f"pixel ({u},{v}) out of bounds")
                self.loop.set_drag_target(self.loop.drag_pixel_to_world((u, v)))
            elif "world" in msg:
                pt = [float(x) for x in msg["world"]]
                if len(pt) != 3 or any(abs(x) > 500.0 for x in pt):
                    raise ValueError("world point out of range")
                self.loop.set_drag_target(pt)
            else:
                raise ValueError("tool_drag needs px, world, or release")
        elif kind == "set_gain":
            name = msg["name"]
            value = float(msg["value"])
            if name not in GAIN_NAMES:
                raise ValueError(f"unknown gain {name!r}")
            if value <= 0:
                raise ValueError("gain must be positive")
            gains = self.loop.gains
            if name == "k_d":
                gains = replace(gains, k_d=value)
            elif name == "k_theta":
                gains = replace(gains, k_theta=value)
            elif name == "kr":
                gains = replace(gains, kr=np.array([value, value]))
            else:
                ks = gains.ks.copy()
                ks[0] = value
                gains = replace(gains, ks=ks)
            self.loop.gains = gains
        elif kind == "set_mrc":
            self.loop.mrc_enabled = bool(msg["on"])
        elif kind == "pause":
            self.loop.paused = True
        elif kind == "resume":
            self.loop.paused = False
        elif kind == "reset":
            seed = int(msg.get("seed", self.config.seed))
            self.loop = SimulationLoop(replace(self.config, seed=seed))
            self._last_record = None
        else:
            raise ValueError(f"unknown message type {kind!r}")

    # -- client handling -----------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._server_socket.accept()
            except OSError:
                return
            threading.Thread(target=self._client_session, args=(conn,),
                             daemon=True).start()

    def _client_session(self, conn: socket.socket) -> None:
        conn.settimeout(10.0)
        try:
            request = self._read_until_blank(conn)
        except (OSError, TimeoutError):
            conn.close()
            return
        first = request.split("\r\n", 1)[0] if request else ""
        if f"/{PROTOCOL_VERSION}" not in first or PROTOCOL_TAG not in request:
            try:
                conn.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
            finally:
                conn.close()
            return
        conn.sendall(
            (
                "HTTP/1.1 101 Switching Protocols\r\n"
                f"Upgrade: {PROTOCOL_TAG}/{PROTOCOL_VERSION}\r\n"
                "Connection: Upgrade\r\n\r\n"
            ).encode("ascii")
        )
        conn.settimeout(None)

        mailbox = _ClientMailbox()
        with self._clients_lock:
            self._clients[conn] = mailbox
        self._send_to(mailbox, {
            "type": "hello",
            "v": PROTOCOL_VERSION,
            "dt": self.config.dt,
            "image": {"width": self.config.intrinsics.width,
                      "height": self.config.intrinsics.height},
            "heatmap": {
                "width": self.loop.heatmap.width,
                "height": self.loop.heatmap.height,
                "pgm_base64": self._heatmap_b64,
            },
            "settings": self._settings_dict(),
        })

        writer = threading.Thread(target=self._writer_loop, args=(conn, mailbox),
                                  daemon=True)
        writer.start()
        self._reader_loop(conn, mailbox)
        mailbox.close()
        with self._clients_lock:
            self._clients.pop(conn, None)
        try:
            conn.close()
        except OSError:
            pass

    @staticmethod
    def _read_until_blank(conn: socket.socket) -> str:
        data = b""
        while b"\r\n\r\n" not in data and b"\n\n" not in data:
            chunk = conn.recv(1024)
            if not chunk:
                break
            data += chunk
            if len(data) > 8192:
                break
        return data.decode("utf-8", errors="replace")

    def _reader_loop(self, conn: socket.socket, mailbox: _ClientMailbox) -> None:
        buffer = b""
        while not self._stop.is_set():
            try:
                chunk = conn.recv(4096)
            except OSError:
                return
            if not chunk:
                return
            buffer += chunk
            while b"\n" in buffer:
                line, buffer = buffer.split(b"\n", 1)
                line = line.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                    if not isinstance(msg, dict):
                        raise ValueError("message must be an object")
                except (json.JSONDecodeError, ValueError) as exc:
                    self._send_to(mailbox, {
                        "type": "error", "v": PROTOCOL_VERSION,
                        "message": f"unparseable message: {exc}",
                    })
                    continue
                try:
                    self._inbound.put_nowait((mailbox, msg))
                except queue.Full:
                    self._send_to(mailbox, {
                        "type": "error", "v": PROTOCOL_VERSION,
                        "message": "inbound queue full, command dropped",
                    })

    def _writer_loop(self, conn: socket.socket, mailbox: _ClientMailbox) -> None:
        while not self._stop.is_set():
            payload = mailbox.take()
            if payload is None:
                return
            try:
                conn.sendall(payload.encode("utf-8"))
            except OSError:
                mailbox.close()
                return


def serve(config: ScenarioConfig, port: int, host: str = "127.0.0.1",
          realtime: bool = True) -> SimService:
    """Start a session service; returns the running service (caller stops it)."""
    service = SimService(config, host=host, port=port, realtime=realtime)
    service.start()
    return service
