# %% [markdown]
# # Full pipeline against a local stand-in endpoint
#
# Runs generate, render, infer, score and analyze through the CLI entry point.
# The stand-in endpoint answers correctly for text prompts and gets every
# other visual prompt wrong in one cell, so the report has something to show.
# Point `endpoint.url` in `run.yaml` at a real chat-completions server to
# evaluate an actual model instead.

# %%
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import yaml

from layoutbench import cli, pipeline
from layoutbench.textio import gold_answer

here = Path(__file__).resolve().parent
raw = yaml.safe_load((here / "run.yaml").read_text())
raw["out"] = str(here / "output" / "run")
raw["datasets"] = [{"task": "transpose", "sizes": {12: 30}},
                   {"task": "life", "sizes": {6: 30}},
                   {"task": "lu", "sizes": {4: 30}}]
config_path = here / "output" / "run.yaml"
config_path.parent.mkdir(exist_ok=True)


def save(cfg_raw):
    config_path.write_text(yaml.safe_dump(cfg_raw))
    return ["--config", str(config_path)]


args = save(raw)
cli.main(["generate", *args])
cli.main(["render", *args])

# %% [markdown]
# Build the stand-in's answer table from the exact prompts the pipeline sends.

# %%
cfg = pipeline.load_config(config_path)
answers = {}
for entry in cfg.datasets:
    instances = pipeline.eval_instances(cfg, pipeline.load_entry(cfg, entry))
    for cond in ("text", "visual"):
        for k, (inst, req) in enumerate(zip(instances, pipeline.build_requests(cfg, entry, cond))):
            text = gold_answer(inst.task, inst.target)
            if cond == "visual" and k % 2:
                text = text.replace("0", "1", 1)
            content = req.messages()[0]["content"]
            key = content if isinstance(content, str) else content[0]["image_url"]["url"]
            answers[key] = text


class Handler(BaseHTTPRequestHandler):
    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        content = body["messages"][0]["content"]
        key = content if isinstance(content, str) else content[0]["image_url"]["url"]
        reply = {"choices": [{"message": {"role": "assistant",
                                          "content": "<think>...</think>\n" + answers[key]}}]}
        data = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *a):
        pass


server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
threading.Thread(target=server.serve_forever, daemon=True).start()
raw["endpoint"]["url"] = f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions"
args = save(raw)

# %%
for cond in ("text", "visual"):
    cli.main(["infer", *args, "--condition", cond])
    cli.main(["score", *args, "--condition", cond])
cli.main(["analyze", *args])
server.shutdown()

print((cfg.report_dir / "accuracy.csv").read_text())
