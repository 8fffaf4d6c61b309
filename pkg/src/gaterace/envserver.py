"""Line-delimited JSON env service over stdio.

Exposes the batch environment to out-of-process callers (the TypeScript
client package ships separately). One request per line, one response per
line; state vectors travel as exact float64 JSON numbers, depth images as
float32-rounded flat lists.

Requests:
  {"op": "make", "config": path|null, "n_envs": N, "overrides": {...}}
  {"op": "reset", "seeds": [..]}          (seeds optional)
  {"op": "step", "actions": [[4 floats] x N]}
  {"op": "spaces"}
  {"op": "close"}

Responses carry {"ok": true, ...} or {"ok": false, "error": msg}.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from .config import EnvConfig, config_from_dict, config_to_dict, load_config
from .env import BatchEnv


def _depth_payload(depth):
    if depth is None:
        return None
    return [float(v) for v in depth.values.astype(np.float32).reshape(-1)]


def _obs_payload(obs):
    return {
        "state": [float(v) for v in obs.state],
        "waypoints": [float(v) for v in obs.waypoints],
        "prev_action": [float(v) for v in obs.prev_action],
        "depth": _depth_payload(obs.depth),
    }


def _result_payload(res):
    return {
        "obs": _obs_payload(res.obs),
        "reward_total": res.reward.total,
        "reward_terms": res.reward.as_dict(),
        "terminated": res.terminated,
        "cause": res.cause.value,
        "info": {k: (None if v is None or (isinstance(v, float) and not np.isfinite(v)) else v)
                 for k, v in res.info.items()},
    }


class EnvService:
    def __init__(self):
        self.batch = None
        self.config = None

    def handle(self, req: dict) -> dict:
        op = req.get("op")
        if op == "make":
            return self._make(req)
        if self.batch is None:
            raise RuntimeError("no environment; send 'make' first (or after 'close')")
        if op == "spaces":
            return self._spaces()
        if op == "reset":
            seeds = req.get("seeds")
            if seeds is not None:
                if len(seeds) != len(self.batch):
                    raise ValueError(f"expected {len(self.batch)} seeds, got {len(seeds)}")
                self.batch.seed([int(s) for s in seeds])
            obs = self.batch.reset()
            return {"ok": True, "obs": [_obs_payload(o) for o in obs]}
        if op == "step":
            actions = req.get("actions")
            arr = np.asarray(actions, dtype=float)
            if arr.ndim != 2 or arr.shape != (len(self.batch), 4):
                raise ValueError(f"actions must have shape ({len(self.batch)}, 4), "
                                 f"got {list(arr.shape)}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("actions must be finite")
            results = self.batch.step(list(arr))
            return {"ok": True, "results": [_result_payload(r) for r in results]}
        if op == "close":
            self.batch.close()
            self.batch = None
            return {"ok": True, "closed": True}
        raise ValueError(f"unknown op '{op}'")

    def _make(self, req):
        cfg = load_config(req["config"]) if req.get("config") else EnvConfig().validate()
        overrides = req.get("overrides")
        if overrides:
            merged = config_to_dict(cfg)
            _deep_update(merged, overrides)
            cfg = config_from_dict(merged)
        n = int(req.get("n_envs", 1))
        if n < 1:
            raise ValueError("n_envs must be >= 1")
        self.config = cfg
        self.batch = BatchEnv(cfg, n, workers=int(req.get("workers", 1)))
        return {"ok": True, **self._spaces()}

    def _spaces(self):
        cfg = self.config
        return {
            "spaces": {
                "n_envs": len(self.batch),
                "depth": [cfg.camera.height, cfg.camera.width] if cfg.depth_enabled else None,
                "state": 18,
                "waypoints": 34,
                "action": 4,
                "action_low": -1.0,
                "action_high": 1.0,
            }
        }


def _deep_update(base: dict, extra: dict):
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value


def main(stdin=None, stdout=None):
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    service = EnvService()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
            resp = service.handle(req)
        except Exception as exc:  # report and keep serving
            resp = {"ok": False, "error": f"{type(exc).__name__}: {exc}"}
        stdout.write(json.dumps(resp) + "\n")
        stdout.flush()
        if resp.get("closed"):
            break


if __name__ == "__main__":
    main()
