"""Stage-by-stage driver: cover, obstruction, harmonic, fit, leafspace, transitivity, prune."""
import logging
import time
from dataclasses import dataclass, field
from os.path import join
from typing import Dict, List, Optional

import numpy as np

from topology import registration
from topology.complex import CellComplex, cycle_basis, homology, is_rational_homology_sphere
from topology.cover import (
    SingularLocus,
    TwoValuedForm,
    antiinvariant_cohomology,
    build_branched_cover,
    haydys_obstruction,
    meridian_cocycle,
)
from topology.errors import InputError, Obstructed, Z2FormsError
from z2forms import flatmodel, intrinsic, leafspace
from z2forms.hodge import harmonic_representative, metric_weights, periods, residual
from z2forms.io import export_graph, read_json, write_json

logger = logging.getLogger(__name__)

SUCCESS = "SUCCESS"
FAILURE = "FAILURE"


@dataclass
class PipelineConfig:
    preset: Optional[str] = None
    complex_path: Optional[str] = None
    locus_path: Optional[str] = None
    form_path: Optional[str] = None
    seed: int = 0
    weights: str = "uniform"
    class_coefficients: Optional[List[float]] = None
    tol: float = 1e-10
    maxiter_factor: int = 10
    denominator_cap: int = 64
    zero_threshold: float = 1e-6
    collision_tol: float = 1e-9
    symbolic_tiebreak: bool = False
    radius: Optional[float] = None
    tol_a_factor: float = 1e-3
    tol_b_factor: float = 1e-2
    prune: bool = False
    pair: str = "auto"
    kappa: float = 1e6
    morse_passes: int = 5
    preset_kwargs: Dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("tol", "zero_threshold", "collision_tol", "tol_a_factor", "tol_b_factor", "kappa"):
            if not getattr(self, name) > 0:
                raise InputError(f"[error] {name} must be positive, got {getattr(self, name)}")
        if int(self.denominator_cap) < 1:
            raise InputError("[error] The denominator cap must be at least 1")
        if self.maxiter_factor < 1 or self.morse_passes < 0:
            raise InputError("[error] Iteration budgets must be positive")
        if self.preset is None and (self.complex_path is None or self.locus_path is None):
            raise InputError("[error] Give a preset or both complex_path and locus_path")

    @classmethod
    def from_dict(cls, config):
        """Flatten the YAML sections into one config."""
        sections = ("input_config", "hodge_config", "leafspace_config", "fit_config", "prune_config")
        flat = {}
        for name in sections:
            flat.update(config.get(name) or {})
        if "enabled" in flat:
            flat["prune"] = flat.pop("enabled")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(flat) - known)
        if unknown:
            raise InputError(f"[error] Unknown config keys {unknown}")
        return cls(**flat)

    def pair_labels(self):
        if self.pair in (None, "auto"):
            return None
        return tuple(f"S{int(i)}" if str(i).isdigit() else str(i) for i in str(self.pair).split(","))


@dataclass
class StageResult:
    status: str
    error: Optional[str] = None
    exit_code: int = 0
    data: Dict = field(default_factory=dict)

    def to_json(self):
        return {"status": self.status, "error": self.error, "exit_code": self.exit_code, **self.data}


@dataclass
class RunReport:
    stages: Dict[str, StageResult] = field(default_factory=dict)
    verdicts: Dict[str, object] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def exit_code(self):
        for stage in self.stages.values():
            if stage.status == FAILURE:
                return stage.exit_code
        return 0

    def to_json(self):
        return {
            "exit_code": self.exit_code,
            "stages": {name: stage.to_json() for name, stage in self.stages.items()},
            "verdicts": dict(self.verdicts),
            "artifacts": list(self.artifacts),
        }


class _Run(object):
    """Holds the state passed between stages."""

    def __init__(self, config, save_path, writer):
        self.config = config
        self.save_path = save_path
        self.writer = writer
        self.report = RunReport()
        self.preset = None

    def artifact(self, name, obj):
        if self.save_path is None:
            return
        if hasattr(obj, "graph"):
            export_graph(obj, join(self.save_path, name + ".json"), "json")
            export_graph(obj, join(self.save_path, name + ".dot"), "dot")
            self.report.artifacts += [name + ".json", name + ".dot"]
        else:
            write_json(obj, join(self.save_path, name + ".json"))
            self.report.artifacts.append(name + ".json")

    def scalar(self, tag, value):
        if self.writer is not None:
            self.writer.add_scalar(tag, value, 0)

    def stage(self, name, fn):
        print("    >>>> %s" % name)
        start = time.time()
        try:
            data = fn() or {}
            result = StageResult(SUCCESS, data=data)
        except Z2FormsError as e:
            logger.info("stage %s failed: %s", name, e)
            result = StageResult(FAILURE, error=f"{type(e).__name__}: {e}", exit_code=e.exit_code)
        elapsed = time.time() - start
        self.report.stages[name] = result
        self.report.timings[name] = elapsed
        self.scalar(f"stage/{name}_seconds", elapsed)
        return result.status == SUCCESS


def load_input(config):
    if config.preset is not None:
        return registration.make(config.preset, **config.preset_kwargs)
    from z2forms.presets import Preset
    complex = CellComplex.from_json(config.complex_path)
    locus = SingularLocus.from_json(read_json(config.locus_path), complex)
    form = None
    if config.form_path is not None:
        form = TwoValuedForm.from_json(read_json(config.form_path), complex)
    return Preset(name="file", complex=complex, locus=locus, form=form,
                  class_coefficients=config.class_coefficients)


def _base_is_rhs(complex):
    if complex.dimension == 3:
        return is_rational_homology_sphere(complex)
    return homology(complex).betti == [1, 0, 1]


def run_pipeline(config, save_path=None, writer=None, until=None):
    """Run the stages in order up to `until`; a failed stage stops the ones after it."""
    run = _Run(config, save_path, writer)
    report = run.report
    np.random.seed(config.seed)
    state = {}

    def cover_stage():
        run.preset = load_input(config)
        complex, locus = run.preset.complex, run.preset.locus
        cover = build_branched_cover(complex, locus, meridian_cocycle(complex, locus))
        cover.check()
        state["cover"] = cover
        run.artifact("cover", cover)
        return {"chi_base": complex.euler_characteristic(), "chi_cover": cover.complex.euler_characteristic(),
                "components": len(locus.components), "dimension": complex.dimension}

    def obstruction_stage():
        cover = state["cover"]
        obstruction = haydys_obstruction(cover, cover.locus, _base_is_rhs(cover.base))
        report.verdicts["obstruction"] = obstruction.passes
        data = {"b1_cover": obstruction.b1_cover, "passes": obstruction.passes, "notes": obstruction.notes}
        if not obstruction.passes:
            raise Obstructed(f"[error] OBSTRUCTED: {obstruction.notes}")
        return data

    def harmonic_stage():
        cover = state["cover"]
        weights = metric_weights(cover, config.weights)
        if run.preset.form is not None:
            given = run.preset.form.lift(cover)
            cycles = cycle_basis(cover.complex)
            if np.abs(periods(given, cycles)).max(initial=0.0) <= leafspace.EXACT_TOL * max(1.0, np.abs(given).max()):
                # exact classes have harmonic representative 0; keep the given form
                state["form"] = given
                r = residual(given, weights, cover.complex)
                run.scalar("hodge/residual", r)
                return {"source": "preset", "residual": r, "weights": weights.kind}
            klass = given
        else:
            klass = config.class_coefficients or run.preset.class_coefficients
            if klass is None:
                klass = [1.0] + [0.0] * (len(antiinvariant_cohomology(cover)) - 1)
        harmonic = harmonic_representative(cover, weights, klass, tol=config.tol,
                                           maxiter_factor=config.maxiter_factor)
        state["form"] = harmonic.cochain
        run.scalar("hodge/residual", harmonic.residual)
        run.scalar("hodge/niter", harmonic.info["niter"])
        run.artifact("harmonic", harmonic)
        return {"source": "solved", "residual": harmonic.residual, "niter": harmonic.info["niter"],
                "class_id": harmonic.class_id, "weights": weights.kind}

    def fit_stage():
        cover = state["cover"]
        samples, scale = flatmodel.sample_component_stations(state["form"], cover, config.radius)
        tol_a, tol_b = flatmodel.default_tolerances(scale, config.tol_a_factor, config.tol_b_factor)
        coeffs, verdicts = [], []
        for label in sorted(samples, key=intrinsic._label_key):
            c = flatmodel.fit_leading_coefficients(samples[label], component=label)
            coeffs.append(c)
            verdicts.extend(flatmodel.nondegeneracy_test([c], tol_a, tol_b))
            run.scalar("fit/max_abs_a", c.max_abs_a)
            run.scalar("fit/min_abs_b", c.min_abs_b)
        report.verdicts["nondegeneracy"] = {v.component: v.verdict for v in verdicts}
        if run.save_path is not None:
            with open(join(run.save_path, "coefficients.txt"), "w") as f:
                f.write(flatmodel.coefficient_table(coeffs, verdicts))
            report.artifacts.append("coefficients.txt")
        return {"scale": scale, "tol_a": tol_a, "tol_b": tol_b,
                "components": [v.to_json() for v in verdicts]}

    def leafspace_stage():
        cover = state["cover"]
        zeros = leafspace.detect_zeros(state["form"], cover, config.zero_threshold)
        umap = leafspace.integrate_rational_class(state["form"], cover, config.denominator_cap)
        graph = leafspace.leaf_graph(umap, cover, zeros, config.collision_tol, config.symbolic_tiebreak)
        state.update(zeros=zeros, umap=umap, graph=graph)
        tree = leafspace.check_tree(graph)
        report.verdicts["tree"] = tree
        report.verdicts["commensurable"] = leafspace.check_commensurable(graph) if not umap.exact else None
        run.scalar("leafspace/n_vertices", graph.graph.number_of_nodes())
        run.scalar("leafspace/n_edges", graph.graph.number_of_edges())
        run.artifact("leaf_graph", graph)
        return {"mu": str(umap.mu), "exact": umap.exact, "zeros": zeros.to_json(), "tree": tree,
                "betti": leafspace.graph_betti(graph), "total_length": leafspace.total_length(graph),
                "non_generic": graph.non_generic}

    def transitivity_stage():
        result = intrinsic.transitivity_check(state["cover"].complex, state["form"])
        report.verdicts["transitive"] = result.transitive
        return result.to_json()

    def prune_stage():
        pair = intrinsic.select_boundary_pair(state["graph"], config.pair_labels())
        result = intrinsic.prune(state["cover"], state["form"], state["graph"], pair, umap=state["umap"],
                                 kappa=config.kappa, passes=config.morse_passes)
        report.verdicts["pruned_interval"] = True
        run.artifact("prune", result)
        return {"pair": list(pair), "b1_cover": result.b1_cover,
                "morse_indices": result.morse_certificate.indices(),
                "witness_cycles": len(result.transitivity.witness_cycles)}

    def wanted(state):
        surface = state["cover"].base.dimension == 2 and len(state["cover"].locus.components) > 0
        return {"fit": surface, "prune": config.prune or until == "prune"}

    print(">>>>>>>> Running pipeline")
    order = [("cover", cover_stage), ("obstruction", obstruction_stage), ("harmonic", harmonic_stage),
             ("fit", fit_stage), ("leafspace", leafspace_stage), ("transitivity", transitivity_stage),
             ("prune", prune_stage)]
    for name, fn in order:
        optional = wanted(state).get(name) if "cover" in state else None
        if optional is False:
            if name == until:
                break
            continue
        ok = run.stage(name, fn)
        # a failed fit leaves the later stages valid
        if (not ok and name != "fit") or name == until:
            break

    if save_path is not None:
        write_json(report, join(save_path, "report.json"))
        write_json(report.timings, join(save_path, "timings.json"))
    logger.info("pipeline finished with exit code %d", report.exit_code)
    return report
