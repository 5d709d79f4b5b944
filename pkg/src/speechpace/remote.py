"""Client for external recognizers speaking the NDJSON adapter protocol.

The adapter is a subprocess; both directions carry one JSON object per
line. The adapter greets with a hello line declaring its capabilities,
then answers each recognize request, echoing the request id. Responses
may arrive out of order; the client correlates by id. Audio travels as
base64 of little-endian signed 16-bit PCM - bit-exact by contract.

    request:  {"v":1,"id":str,"op":"recognize","sample_rate":16000,
               "pcm16le_b64":str,"want_posteriors":bool}
    response: {"v":1,"id":str,"transcript":str,"alphabet":[str...],
               "frame_hop_ms":num,"log_posteriors":[[num...]...]|null,
               "error":str|null}
    hello:    {"v":1,"op":"hello","supports_posteriors":bool,
               "max_concurrent":int}
"""

from __future__ import annotations

import base64
import json
import queue
import shlex
import subprocess
import threading
import uuid

import numpy as np

from .audio import AudioBuffer
from .ctc import Posteriorgram
from .recognize import RecognitionResult, RecognizerCapabilities

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT_S = 30.0


class AdapterError(RuntimeError):
    """Base class; `retriable` hints whether a retry could succeed."""

    retriable = False


class AdapterTimeout(AdapterError):
    retriable = True


class AdapterCrashed(AdapterError):
    retriable = True


class AdapterProtocolError(AdapterError):
    retriable = False


class AdapterResponseError(AdapterError):
    """The adapter answered, but with an error for this request."""

    retriable = False


def encode_pcm16(buffer: AudioBuffer) -> str:
    q = np.clip(np.rint(buffer.samples * 32768.0), -32768, 32767).astype("<i2")
    return base64.b64encode(q.tobytes()).decode("ascii")


def decode_pcm16(payload_b64: str, sample_rate: int) -> AudioBuffer:
    raw = base64.b64decode(payload_b64.encode("ascii"), validate=True)
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return AudioBuffer(samples, sample_rate)


class RemoteRecognizer:
    """Spawns an adapter command and proxies recognize() calls to it."""

    def __init__(
        self,
        command: str | list[str],
        timeout_s: float = DEFAULT_TIMEOUT_S,
        want_posteriors: bool = True,
    ):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise AdapterCrashed(f"could not spawn adapter {argv!r}: {exc}") from exc
        self._timeout = timeout_s
        self._want_posteriors = want_posteriors
        self._lines: queue.Queue = queue.Queue()
        self._pending: dict[str, dict] = {}
        self._lock = threading.Lock()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

        hello = self._next_message(self._timeout)
        if hello.get("op") != "hello":
            raise AdapterProtocolError(f"expected hello, got {hello!r}")
        if hello.get("v") != PROTOCOL_VERSION:
            raise AdapterProtocolError(f"protocol version mismatch: {hello.get('v')!r}")
        self._caps = RecognizerCapabilities(
            supports_posteriors=bool(hello.get("supports_posteriors", False)),
            max_concurrent=int(hello.get("max_concurrent", 1)),
        )
        self._slots = threading.Semaphore(self._caps.max_concurrent)

    def capabilities(self) -> RecognizerCapabilities:
        return self._caps

    def _read_loop(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def _next_message(self, timeout: float) -> dict:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise AdapterTimeout(f"no adapter output within {timeout} s") from None
        if line is None:
            code = self._proc.poll()
            raise AdapterCrashed(f"adapter closed its output (exit code {code})")
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise AdapterProtocolError(f"adapter sent non-JSON line: {line!r}") from exc
        if not isinstance(msg, dict):
            raise AdapterProtocolError(f"adapter sent a non-object line: {msg!r}")
        return msg

    def recognize(self, buffer: AudioBuffer) -> RecognitionResult:
        req_id = uuid.uuid4().hex
        request = {
            "v": PROTOCOL_VERSION,
            "id": req_id,
            "op": "recognize",
            "sample_rate": buffer.sample_rate_hz,
            "pcm16le_b64": encode_pcm16(buffer),
            "want_posteriors": self._want_posteriors and self._caps.supports_posteriors,
        }
        with self._slots:
            with self._lock:
                if self._proc.poll() is not None:
                    raise AdapterCrashed(
                        f"adapter already exited with code {self._proc.returncode}"
                    )
                try:
                    assert self._proc.stdin is not None
                    self._proc.stdin.write(json.dumps(request) + "\n")
                    self._proc.stdin.flush()
                except (BrokenPipeError, OSError) as exc:
                    raise AdapterCrashed(f"adapter pipe closed: {exc}") from exc
            response = self._await_response(req_id)
        return self._parse_response(response)

    def _await_response(self, req_id: str) -> dict:
        while True:
            with self._lock:
                if req_id in self._pending:
                    return self._pending.pop(req_id)
            msg = self._next_message(self._timeout)
            if msg.get("v") != PROTOCOL_VERSION:
                raise AdapterProtocolError(f"response version {msg.get('v')!r}")
            rid = msg.get("id")
            if rid == req_id:
                return msg
            if isinstance(rid, str):
                with self._lock:
                    self._pending[rid] = msg

    def _parse_response(self, msg: dict) -> RecognitionResult:
        if msg.get("error"):
            raise AdapterResponseError(str(msg["error"]))
        try:
            transcript = msg["transcript"]
            alphabet = list(msg["alphabet"])
        except KeyError as exc:
            raise AdapterProtocolError(f"response missing field {exc.args[0]!r}") from None
        post = None
        if msg.get("log_posteriors") is not None:
            try:
                post = Posteriorgram(
                    np.array(msg["log_posteriors"], dtype=np.float64),
                    alphabet,
                    float(msg.get("frame_hop_ms") or 0.0),
                )
            except (ValueError, TypeError) as exc:
                raise AdapterProtocolError(f"bad posteriors: {exc}") from exc
        return RecognitionResult(
            transcript=str(transcript), posteriorgram=post, alphabet=alphabet
        )

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "RemoteRecognizer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
