"""Protocol test double: a deterministic toy forecaster behind the wire
protocol, with switchable failure modes for exercising the client."""

import argparse
import json
import sys


def daily_repeat(values, horizon):
    lag = min(24, len(values))
    return [values[len(values) - lag + (h % lag)] for h in range(horizon)]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--model-id", default="fake-quantile")
    parser.add_argument("--point-only", action="store_true")
    parser.add_argument("--crash-after", type=int, default=0, help="exit before the Nth request")
    parser.add_argument("--fail-substring", default=None, help="error reply for matching task ids")
    parser.add_argument("--bad-handshake", action="store_true")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    served = 0
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        msg = json.loads(line)
        if msg["type"] == "hello":
            if args.bad_handshake:
                reply = {"type": "oops"}
            else:
                reply = {
                    "type": "model_info",
                    "model_id": args.model_id,
                    "quantile_levels": [] if args.point_only else [0.1, 0.5, 0.9],
                    "parameter_count": 0,
                    "seed": args.seed,
                }
            print(json.dumps(reply), flush=True)
            continue
        if msg["type"] != "forecast":
            print(json.dumps({"type": "error", "task_id": msg.get("task_id"),
                              "message": f"unknown type {msg['type']}"}), flush=True)
            continue
        if args.crash_after and served >= args.crash_after:
            sys.exit(1)
        served += 1
        task_id = msg["task_id"]
        if args.fail_substring and args.fail_substring in task_id:
            print(json.dumps({"type": "error", "task_id": task_id,
                              "message": "synthetic model failure"}), flush=True)
            continue
        values = msg["values"]
        horizon = msg["horizon"]
        levels = msg["quantile_levels"]
        point = daily_repeat(values, horizon)
        if args.point_only:
            reply = {
                "type": "forecast_result",
                "task_id": task_id,
                "point": point,
                "quantiles": None,
                "inference_seconds": 0.001,
            }
        else:
            spread = 0.05 * (sum(abs(v) for v in values) / len(values))
            quantiles = [[p + spread * 4.0 * (l - 0.5) for l in levels] for p in point]
            reply = {
                "type": "forecast_result",
                "task_id": task_id,
                "point": point,
                "quantiles": quantiles,
                "inference_seconds": 0.001,
            }
        print(json.dumps(reply), flush=True)


if __name__ == "__main__":
    main()
