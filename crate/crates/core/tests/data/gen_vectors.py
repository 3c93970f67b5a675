#!/usr/bin/env python3
"""Writes vectors.txt: one hex frame per line followed by its expected JSON decode.

Frames are assembled here with struct packing and a bit-by-bit CRC so the
vectors do not depend on the Rust encoder.
"""
import json
import struct


def crc16_ccitt_false(data: bytes) -> int:
    crc = 0xFFFF
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
    return crc


def frame(msg_type: int, payload: bytes) -> bytes:
    body = bytes([msg_type]) + struct.pack("<H", len(payload)) + payload
    return b"\xa5" + body + struct.pack("<H", crc16_ccitt_false(body))


KINDS = ["started", "step_advanced", "phase_changed", "completed", "cancelled"]
PHASES = ["tense", "relax"]
CMDS = ["start_training", "cancel_training", "toggle_silent"]
HKINDS = ["level", "squeeze", "prompt", "session_started", "session_completed",
          "session_cancelled", "silent_on", "silent_off"]

vectors = [
    (frame(0x01, struct.pack("<QHB", 0, 0, 0)),
     {"type": "LevelUpdate", "t_ms": 0, "accumulator": 0, "led_level": 0}),
    (frame(0x01, struct.pack("<QHB", 123456, 1000, 8)),
     {"type": "LevelUpdate", "t_ms": 123456, "accumulator": 1000, "led_level": 8}),
    (frame(0x02, struct.pack("<QHH", 98765, 1023, 450)),
     {"type": "Squeeze", "t_ms": 98765, "peak": 1023, "duration_ms": 450}),
    (frame(0x03, struct.pack("<Q", 2**40 + 7)),
     {"type": "TrainingPrompt", "t_ms": 2**40 + 7}),
    (frame(0x05, struct.pack("<QB", 5, 1)),
     {"type": "SilentMode", "t_ms": 5, "on": True}),
    (frame(0x05, struct.pack("<QB", 6, 0)),
     {"type": "SilentMode", "t_ms": 6, "on": False}),
    (frame(0x11, struct.pack("<QQ", 0, 2**64 - 1)),
     {"type": "HistoryRequest", "from_ms": 0, "to_ms": 2**64 - 1}),
]
for k, kind in enumerate(KINDS):
    vectors.append((frame(0x04, struct.pack("<QBBB", 15000 * k, k, k, k % 2)),
                    {"type": "SessionEvent", "t_ms": 15000 * k, "kind": kind, "step": k, "phase": PHASES[k % 2]}))
for c, cmd in enumerate(CMDS):
    vectors.append((frame(0x10, bytes([c])), {"type": "Command", "cmd": cmd}))

records = [(1_700_000_000_000 + 1000 * i, i % 8, 37 * i) for i in range(8)]
payload = struct.pack("<H", len(records)) + b"".join(struct.pack("<QBH", *r) for r in records)
vectors.append((frame(0x12, payload), {
    "type": "HistoryResponse", "count": len(records),
    "records": [{"t_ms": t, "kind": HKINDS[k], "value": v} for t, k, v in records]}))
vectors.append((frame(0x12, struct.pack("<H", 0)), {"type": "HistoryResponse", "count": 0, "records": []}))

with open("vectors.txt", "w") as f:
    f.write("# hex frame <space> expected message as canonical JSON\n")
    for raw, msg in vectors:
        f.write(raw.hex() + " " + json.dumps(msg, separators=(",", ":")) + "\n")

print("crc('123456789') = 0x%04X" % crc16_ccitt_false(b"123456789"))
print("Command start_training frame:", frame(0x10, b"\x00").hex())
print("LevelUpdate{0,0,0} frame:", frame(0x01, bytes(11)).hex())
