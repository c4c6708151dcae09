"""Stateless advisory endpoint: POST /v1/recommend takes observed
(bitrate, psnr) points per GOP plus a target bitrate and modes, and
answers with per-GOP recommendations and a savings summary.

Requests are independent and served over a shared immutable model, so
the threading server needs no locking. Malformed requests get structured
error documents, never dropped connections.

Request document:
    {"target_bitrate": 3.0, "modes": ["vl"],
     "gops": [{"gop_id": "g1", "tier": "1080p", "points": [[0.8, 37.1], ...]}]}

Response document:
    {"recommendations": [...one entry per request GOP, in order...],
     "savings": {"total_target": ..., "total_proposed": ..., "saving_percent": ...}}

A GOP that cannot be answered gets {"gop_id": ..., "error": ...} in its
slot; the savings summary covers the answered GOPs (null if none).
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .clustering import ClusterModelSet
from .decision import (
    DecisionConfig,
    GopObservation,
    Modes,
    Recommendation,
    build_ladders,
    nzs_intervals,
    recommend,
    vl_thresholds,
)
from .errors import RDLadderError, ValidationError
from .tiers import tier_from_name

RECOMMEND_PATH = "/v1/recommend"


def recommendation_to_dict(rec: Recommendation) -> dict:
    return {
        "gop_id": rec.gop_id,
        "cluster": rec.cluster,
        "tier": rec.tier.name,
        "target_bitrate": rec.target_bitrate,
        "proposed_bitrate": rec.proposed_bitrate,
        "predicted_psnr": rec.predicted_psnr,
        "modes_applied": list(rec.modes_applied),
        "rationale": rec.rationale,
    }


def _parse_observation(entry, index: int) -> GopObservation:
    if not isinstance(entry, dict):
        raise ValidationError(f"gops[{index}] must be an object")
    gop_id = entry.get("gop_id")
    if not isinstance(gop_id, str) or not gop_id:
        raise ValidationError(f"gops[{index}]: gop_id must be a non-empty string")
    tier_name = entry.get("tier")
    if not isinstance(tier_name, str):
        raise ValidationError(f"gops[{index}]: tier must be a string")
    tier = tier_from_name(tier_name)
    points = entry.get("points")
    if not isinstance(points, list) or not points:
        raise ValidationError(f"gops[{index}]: points must be a non-empty list")
    parsed = []
    for p in points:
        if not isinstance(p, (list, tuple)) or len(p) != 2:
            raise ValidationError(f"gops[{index}]: each point must be a [bitrate, psnr] pair")
        parsed.append((float(p[0]), float(p[1])))
    return GopObservation(gop_id=gop_id, tier=tier, points=tuple(parsed))


def handle_recommend_request(
    payload, model_set: ClusterModelSet, cfg: DecisionConfig
) -> tuple[int, dict]:
    """Process one advisory request document; returns (http_status, body).
    Pure function: all the protocol logic lives here, the HTTP handler
    only moves bytes."""
    if not isinstance(payload, dict):
        return 400, {"error": "request body must be a JSON object"}
    try:
        target = float(payload.get("target_bitrate"))
    except (TypeError, ValueError):
        return 400, {"error": "target_bitrate must be a number"}
    modes_field = payload.get("modes", [])
    if not isinstance(modes_field, list) or not all(isinstance(m, str) for m in modes_field):
        return 400, {"error": "modes must be a list of strings"}
    try:
        modes = Modes.parse(",".join(modes_field))
    except ValidationError as exc:
        return 400, {"error": str(exc)}
    if not modes.any_enabled:
        return 400, {"error": "at least one mode must be enabled"}
    gops = payload.get("gops")
    if not isinstance(gops, list) or not gops:
        return 400, {"error": "gops must be a non-empty list"}
    if not (target > 0):
        return 400, {"error": "target_bitrate must be > 0"}

    ladders = build_ladders(model_set, cfg) if modes.trans_size else None
    thresholds = vl_thresholds(model_set, cfg) if modes.vl else None
    intervals = nzs_intervals(model_set, cfg) if modes.nzs else None

    answers = []
    pairs = []
    for index, entry in enumerate(gops):
        try:
            obs = _parse_observation(entry, index)
            rec = recommend(
                obs, model_set, cfg, modes, target,
                ladders=ladders, thresholds=thresholds, intervals=intervals,
            )
            answers.append(recommendation_to_dict(rec))
            pairs.append((rec.target_bitrate, rec.proposed_bitrate))
        except (RDLadderError, TypeError, ValueError) as exc:
            gop_id = entry.get("gop_id", "") if isinstance(entry, dict) else ""
            answers.append({"gop_id": gop_id, "error": str(exc)})

    savings = None
    if pairs:
        total_target = sum(t for t, _ in pairs)
        total_proposed = sum(p for _, p in pairs)
        savings = {
            "total_target": total_target,
            "total_proposed": total_proposed,
            "saving_percent": 100.0 * (total_target - total_proposed) / total_target,
        }
    return 200, {"recommendations": answers, "savings": savings}


def make_server(
    model_set: ClusterModelSet,
    host: str = "127.0.0.1",
    port: int = 8080,
    cfg: DecisionConfig | None = None,
    quiet: bool = True,
) -> ThreadingHTTPServer:
    """Build (but do not start) the advisory HTTP server; callers run
    ``serve_forever`` themselves, which keeps tests and the CLI honest
    about ownership of the listening socket."""
    decision_cfg = cfg or DecisionConfig()

    class AdvisoryHandler(BaseHTTPRequestHandler):
        def _send(self, status: int, body: dict):
            data = json.dumps(body).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_POST(self):
            if self.path != RECOMMEND_PATH:
                self._send(404, {"error": f"unknown path {self.path!r}; POST {RECOMMEND_PATH}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                raw = self.rfile.read(length)
                payload = json.loads(raw.decode("utf-8"))
            except (ValueError, UnicodeDecodeError):
                self._send(400, {"error": "request body must be valid JSON"})
                return
            try:
                status, body = handle_recommend_request(payload, model_set, decision_cfg)
            except Exception as exc:  # defensive: never drop the connection
                self._send(500, {"error": f"internal error: {exc}"})
                return
            self._send(status, body)

        def do_GET(self):
            self._send(405, {"error": f"only POST {RECOMMEND_PATH} is supported"})

        def log_message(self, fmt, *args):
            if not quiet:
                super().log_message(fmt, *args)

    return ThreadingHTTPServer((host, port), AdvisoryHandler)
