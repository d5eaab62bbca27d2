import argparse
import logging
import os
import shutil
import sys
import uuid
from datetime import datetime
from os.path import exists, join
from pprint import pformat

import numpy as np
import torch
import yaml
from tensorboardX import SummaryWriter

from topology import registration
from topology.errors import ParseError, Z2FormsError
from z2forms import leafspace
from z2forms.io import dumps, graph_from_json
from z2forms.pipeline import PipelineConfig, run_pipeline

OUT_ROOT = os.getenv("Z2FORMS_OUT", "logging")


def initialize_config(config_path, save_path):
    if config_path is None:
        return {"input_config": {}, "save_path": save_path, "config_path": None}
    try:
        with open(config_path, 'r') as f:
            config = yaml.load(f, Loader=yaml.FullLoader)
    except yaml.YAMLError as e:
        raise ParseError(f"[error] Malformed config {config_path}: {e}")
    config["save_path"] = save_path
    config["config_path"] = config_path
    return config


def initialize_logging(config, name):
    now = datetime.now()
    string = now.strftime("%Y_%m_%d_%H_%M")

    save_path = join(config["save_path"], name, string, uuid.uuid4().hex[:4])
    print("    >>>> Saving to %s" % save_path)
    if not exists(save_path):
        os.makedirs(save_path)
    writer = SummaryWriter(save_path)

    if config["config_path"] is not None:
        shutil.copyfile(config["config_path"], join(save_path, "config.yaml"))
    else:
        with open(join(save_path, "config.yaml"), "w") as f:
            yaml.dump({k: v for k, v in config.items() if k not in ("save_path", "config_path")}, f)
    return save_path, writer


def seed(value):
    np.random.seed(value)
    torch.manual_seed(value)


def apply_overrides(config, args):
    sections = config.setdefault("input_config", {}) or {}
    config["input_config"] = sections
    if getattr(args, "preset", None):
        sections["preset"] = args.preset
    for key in ("complex_path", "locus_path", "form_path"):
        if getattr(args, key, None):
            sections[key] = getattr(args, key)
    if args.seed is not None:
        sections["seed"] = args.seed
    hodge = config.setdefault("hodge_config", {}) or {}
    config["hodge_config"] = hodge
    if args.tol is not None:
        hodge["tol"] = args.tol
    if getattr(args, "weights", None):
        hodge["weights"] = args.weights
    if getattr(args, "klass", None):
        hodge["class_coefficients"] = [float(x) for x in args.klass.split(",")]
    prune = config.setdefault("prune_config", {}) or {}
    config["prune_config"] = prune
    if getattr(args, "pair", None):
        prune["pair"] = args.pair
    if getattr(args, "kappa", None) is not None:
        prune["kappa"] = args.kappa
    return config


def add_input_arguments(parser):
    parser.add_argument('--preset', dest='preset', default=None)
    parser.add_argument('--complex', dest='complex_path', default=None)
    parser.add_argument('--locus', dest='locus_path', default=None)
    parser.add_argument('--form', dest='form_path', default=None)
    parser.add_argument('--config', dest='config_path', default=None)


def build_parser():
    parser = argparse.ArgumentParser(description='Z/2 harmonic 1-forms on branched double covers')
    parser.add_argument('--tol', dest='tol', type=float, default=None)
    parser.add_argument('--seed', dest='seed', type=int, default=None)
    parser.add_argument('--out', dest='out', default=OUT_ROOT)
    sub = parser.add_subparsers(dest='command', required=True)

    for name in ("cover", "fit", "pipeline"):
        add_input_arguments(sub.add_parser(name))
    harmonic = sub.add_parser("harmonic")
    add_input_arguments(harmonic)
    harmonic.add_argument('--weights', dest='weights', default=None)
    harmonic.add_argument('--class', dest='klass', default=None)
    leaf = sub.add_parser("leafspace")
    add_input_arguments(leaf)
    leaf.add_argument('--oracle', dest='oracle', type=int, nargs=2, default=None)
    leaf.add_argument('--format', dest='format', choices=["json", "dot"], default="json")
    prune = sub.add_parser("prune")
    add_input_arguments(prune)
    prune.add_argument('--pair', dest='pair', default=None)
    prune.add_argument('--kappa', dest='kappa', type=float, default=None)
    prune.add_argument('--report', dest='report', default=None)
    sub.add_parser("presets")
    return parser


UNTIL = {"cover": "obstruction", "harmonic": "harmonic", "fit": "fit", "leafspace": "transitivity",
         "prune": "prune", "pipeline": None}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        for name in registration.list_presets():
            print(name)
        return 0

    try:
        config = initialize_config(args.config_path, args.out)
        config = apply_overrides(config, args)
        pipeline_config = PipelineConfig.from_dict(config)
    except Z2FormsError as e:
        print(str(e), file=sys.stderr)
        return e.exit_code
    print(">>>>>>>> Loaded config:\n%s" % pformat(config))
    seed(pipeline_config.seed)
    name = pipeline_config.preset or "file"
    save_path, writer = initialize_logging(config, name)

    report = run_pipeline(pipeline_config, save_path, writer, until=UNTIL[args.command])
    writer.close()
    if args.command == "leafspace" and report.exit_code == 0:
        run_leafspace_extras(args, pipeline_config, save_path)
    if args.command == "prune" and args.report is not None and exists(join(save_path, "prune.json")):
        shutil.copyfile(join(save_path, "prune.json"), args.report)
    print(dumps(report.to_json()), end="")
    return report.exit_code


def run_leafspace_extras(args, config, save_path):
    graph = graph_from_json(join(save_path, "leaf_graph.json"))
    if args.format == "dot":
        with open(join(save_path, "leaf_graph.dot")) as f:
            print(f.read(), end="")
    if args.oracle is not None:
        preset = registration.make(config.preset) if config.preset else None
        if preset is None or preset.form is None:
            print("    >>>> The oracle needs a preset with a base form")
            return
        x, y = args.oracle
        print("    >>>> d_v(%d, %d) <= %.17g" % (x, y, leafspace.dv_oracle(preset.complex, preset.form.values, x, y)))
    print("    >>>> leaf graph: %d vertices, %d edges" % (graph.graph.number_of_nodes(), graph.graph.number_of_edges()))


if __name__ == "__main__":
    sys.exit(main())
