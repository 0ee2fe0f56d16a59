"""The refinement loop.

A discriminator scores the original document, a generator rewrites it, the
discriminator scores the rewrite, and, in the iterative strategy, the score
goes back to the generator as a reinforcement or rejection cue until the
goal score reaches the threshold or the iteration budget runs out. The
single-pass strategy makes one generator call and never sends feedback.
"""
import json
import logging
import collections
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

from tqdm import tqdm

from .structures import (
    Verdict, ValidationError, CorpusError, GeneratorError, DiscriminatorError
)
from .generator.prompts import (
    FeedbackCue, TaskDescriptor, build_initial_prompt, build_feedback_prompt
)

MSMI = "msmi"
PROMPT = "prompt"
STRATEGIES = (MSMI, PROMPT)

TARGETED = "targeted"
UNTARGETED = "untargeted"

THRESHOLD_MET = "threshold_met"
BUDGET_EXHAUSTED = "budget_exhausted"
GENERATOR_ERROR = "generator_error"
SCORER_ERROR = "scorer_error"
STOP_REASONS = (THRESHOLD_MET, BUDGET_EXHAUSTED, GENERATOR_ERROR,
                SCORER_ERROR)

TRACE_SCHEMA = "trace_v1"


@dataclass(frozen=True)
class AttackGoal:
    """Reach class `target`, or just leave the original prediction"""
    kind: str = TARGETED
    target: int = None

    @classmethod
    def targeted(cls, target):
        """Goal of reaching one class"""
        return cls(TARGETED, int(target))

    @classmethod
    def untargeted(cls):
        """Goal of leaving the original class"""
        return cls(UNTARGETED, None)

    @property
    def is_targeted(self):
        """True for a targeted goal"""
        return self.kind == TARGETED

    def check(self, num_classes):
        """Targets must name an existing class"""
        if self.kind not in (TARGETED, UNTARGETED):
            raise ValidationError("unknown goal kind {!r}".format(self.kind))
        if self.is_targeted and not 0 <= self.target < num_classes:
            raise ValidationError(
                "target class {} outside {} classes".format(
                    self.target, num_classes))


@dataclass(frozen=True)
class EngineConfig:
    """Loop settings. input_fields picks the record fields the
    discriminator sees; the rewritten claim takes the claim's place."""
    threshold: float = 0.5
    max_iterations: int = 5
    strategy: str = MSMI
    goal: AttackGoal = AttackGoal.targeted(1)
    input_fields: tuple = ("claim",)
    full_history: bool = False

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValidationError(
                "threshold must be strictly between 0 and 1, got {!r}".format(
                    self.threshold))
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValidationError(
                "unknown strategy {!r}".format(self.strategy))
        if not self.input_fields or "claim" not in self.input_fields:
            raise ValidationError("input_fields must include 'claim'")


@dataclass
class Iteration:
    """One candidate, its verdict and goal score, and the cue sent after
    it (None when no feedback followed)"""
    index: int
    candidate_text: str
    verdict: Verdict
    goal_score: float
    feedback_sent: str = None
    retries: int = 0

    def to_dict(self):
        """Plain form for the trace file"""
        return collections.OrderedDict((
            ("index", self.index),
            ("candidate_text", self.candidate_text),
            ("verdict", self.verdict.to_dict()),
            ("goal_score", self.goal_score),
            ("feedback_sent", self.feedback_sent),
            ("retries", self.retries),
        ))

    @classmethod
    def from_dict(cls, data):
        """Inverse of to_dict"""
        return cls(int(data["index"]), data["candidate_text"],
                   Verdict.from_dict(data["verdict"]),
                   float(data["goal_score"]), data["feedback_sent"],
                   int(data["retries"]))


@dataclass
class RefinementTrace:
    """Everything that happened to one document"""
    doc_id: str
    original_text: str
    original_verdict: Verdict
    original_goal_score: float
    iterations: list = field(default_factory=list)
    stop_reason: str = None
    error: str = None
    error_retries: int = 0

    @property
    def original_prediction(self):
        """Class the discriminator gave the untouched document"""
        return self.original_verdict.predicted


@dataclass
class RefinementResult:
    """The trace plus the accepted (or best) candidate"""
    trace: RefinementTrace
    success: bool
    output_text: str
    output_goal_score: float
    output_prediction: int
    true_label: int = None

    def to_dict(self):
        """One trace file record"""
        trace = self.trace
        return collections.OrderedDict((
            ("schema", TRACE_SCHEMA),
            ("doc_id", trace.doc_id),
            ("original_text", trace.original_text),
            ("original_verdict", trace.original_verdict.to_dict()),
            ("original_goal_score", trace.original_goal_score),
            ("iterations", [it.to_dict() for it in trace.iterations]),
            ("stop_reason", trace.stop_reason),
            ("error", trace.error),
            ("error_retries", trace.error_retries),
            ("success", self.success),
            ("output_text", self.output_text),
            ("output_goal_score", self.output_goal_score),
            ("output_prediction", self.output_prediction),
            ("true_label", self.true_label),
        ))

    @classmethod
    def from_dict(cls, data):
        """Inverse of to_dict"""
        trace = RefinementTrace(
            doc_id=data["doc_id"],
            original_text=data["original_text"],
            original_verdict=Verdict.from_dict(data["original_verdict"]),
            original_goal_score=float(data["original_goal_score"]),
            iterations=[Iteration.from_dict(it)
                        for it in data["iterations"]],
            stop_reason=data["stop_reason"],
            error=data["error"],
            error_retries=int(data.get("error_retries", 0)),
        )
        return cls(trace, bool(data["success"]), data["output_text"],
                   float(data["output_goal_score"]),
                   int(data["output_prediction"]), data["true_label"])


def goal_score(verdict, goal, original_prediction):
    """Progress toward the goal in [0, 1]: the target's probability, or
    the probability mass off the original prediction"""
    if goal.is_targeted:
        return verdict.probabilities[goal.target]
    return 1.0 - verdict.probabilities[original_prediction]


def goal_reached(verdict, score, goal, original_prediction, threshold):
    """Threshold crossing; untargeted goals also need the argmax to have
    left the original class"""
    if score < threshold:
        return False
    return goal.is_targeted or verdict.predicted != original_prediction


def task_for(goal, label_names, schema="findr"):
    """Prompt task matching a goal"""
    if goal.is_targeted:
        return TaskDescriptor(schema, label_names[goal.target])
    return TaskDescriptor(schema, None)


def _select_output(trace, success):
    """Accepted candidate on success; otherwise the best goal score, the
    earliest on ties, or the original text when nothing was generated"""
    if success:
        best = trace.iterations[-1]
    elif trace.iterations:
        best = trace.iterations[0]
        for it in trace.iterations[1:]:
            if it.goal_score > best.goal_score:
                best = it
    else:
        return (trace.original_text, trace.original_goal_score,
                trace.original_prediction)
    return best.candidate_text, best.goal_score, best.verdict.predicted


def _refine(doc, scorer, generator, cfg, budget, send_feedback, task,
            templates, original_verdict=None):
    goal = cfg.goal
    if original_verdict is None:
        original_verdict = scorer.score(doc.text_for(cfg.input_fields))
    original_prediction = original_verdict.predicted
    trace = RefinementTrace(
        doc_id=doc.id,
        original_text=doc.claim,
        original_verdict=original_verdict,
        original_goal_score=goal_score(original_verdict, goal,
                                       original_prediction),
    )
    if task is None:
        task = task_for(goal, scorer.label_names)

    session = generator.open_session(doc)
    prompt = build_initial_prompt(doc, task, templates)
    previous = trace.original_goal_score
    for index in range(1, budget + 1):
        try:
            generation = session.generate(prompt)
        except GeneratorError as error:
            logging.warning("Generator failed on %s: %s", doc.id, error)
            trace.stop_reason = GENERATOR_ERROR
            trace.error = str(error)
            trace.error_retries = error.retries
            break
        try:
            verdict = scorer.score(
                doc.text_for(cfg.input_fields, claim=generation.text))
        except DiscriminatorError as error:
            logging.warning("Scoring failed on %s: %s", doc.id, error)
            trace.stop_reason = SCORER_ERROR
            trace.error = str(error)
            break

        score = goal_score(verdict, goal, original_prediction)
        iteration = Iteration(index, generation.text, verdict, score,
                              retries=generation.retries)
        trace.iterations.append(iteration)
        if goal_reached(verdict, score, goal, original_prediction,
                        cfg.threshold):
            trace.stop_reason = THRESHOLD_MET
            break
        if send_feedback and index < budget:
            cue = FeedbackCue.between(previous, score)
            iteration.feedback_sent = cue.direction
            prompt = build_feedback_prompt(doc, trace, cue, task, templates,
                                           cfg.full_history)
        previous = score
    else:
        trace.stop_reason = BUDGET_EXHAUSTED

    success = trace.stop_reason == THRESHOLD_MET
    output_text, output_score, output_prediction = _select_output(
        trace, success)
    logging.debug("%s: %s after %d iterations", doc.id, trace.stop_reason,
                  len(trace.iterations))
    return RefinementResult(trace, success, output_text, output_score,
                            output_prediction, doc.label)


def refine_msmi(doc, scorer, generator, cfg, task=None, templates=None,
                original_verdict=None):
    """Iterate generate / score / feedback until the goal score reaches
    the threshold or max_iterations candidates were tried"""
    if cfg.strategy != MSMI:
        raise ValidationError("refine_msmi needs strategy {!r}".format(MSMI))
    return _refine(doc, scorer, generator, cfg, cfg.max_iterations, True,
                   task, templates, original_verdict)


def refine_single_pass(doc, scorer, generator, cfg, task=None,
                       templates=None, original_verdict=None):
    """One generator call from the initial prompt; the discriminator only
    judges the result"""
    if cfg.strategy != PROMPT:
        raise ValidationError(
            "refine_single_pass needs strategy {!r}".format(PROMPT))
    return _refine(doc, scorer, generator, cfg, 1, False, task, templates,
                   original_verdict)


STRATEGY_TO_REFINER = {
    MSMI: refine_msmi,
    PROMPT: refine_single_pass,
}


def is_eligible(doc, verdict, goal):
    """Targeted runs take documents not yet predicted as the target;
    untargeted runs take documents the discriminator gets right"""
    if goal.is_targeted:
        return verdict.predicted != goal.target
    return verdict.predicted == doc.label


def select_eligible(corpus, scorer, cfg):
    """(doc, original verdict) pairs worth refining, in corpus order"""
    eligible = []
    for doc in corpus:
        try:
            verdict = scorer.score(doc.text_for(cfg.input_fields))
        except DiscriminatorError as error:
            logging.warning("Skipping %s, scoring failed: %s", doc.id, error)
            continue
        if is_eligible(doc, verdict, cfg.goal):
            eligible.append((doc, verdict))
    logging.info("%d of %d documents are eligible", len(eligible),
                 len(corpus))
    return eligible


def run_batch(corpus, scorer, generator, cfg, parallelism=1, task=None,
              templates=None, progress=False):
    """Refine every eligible document of a corpus, up to `parallelism` at
    a time. Results come back in corpus order."""
    if parallelism < 1:
        raise ValidationError("parallelism must be >= 1")
    cfg.goal.check(len(scorer.label_names))
    if task is None:
        task = task_for(cfg.goal, scorer.label_names, corpus.schema)
    refine = STRATEGY_TO_REFINER[cfg.strategy]
    eligible = select_eligible(corpus, scorer, cfg)

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(refine, doc, scorer, generator, cfg, task,
                               templates, verdict)
                   for doc, verdict in eligible]
        for _ in tqdm(as_completed(futures), total=len(futures),
                      desc="refining", unit="doc", disable=not progress):
            pass
        results = [future.result() for future in futures]

    logging.info("Refined %d documents, %d succeeded", len(results),
                 sum(1 for r in results if r.success))
    return results


def write_traces(results, path):
    """One JSON line per document"""
    with open(path, "w", encoding="utf-8") as out_file:
        for result in results:
            out_file.write(json.dumps(result.to_dict(), ensure_ascii=False) +
                           "\n")


def read_traces(path):
    """Results back from a trace file. The file must exist, be non-empty
    and carry the current schema on every line."""
    try:
        with open(path, "r", encoding="utf-8") as in_file:
            lines = [line for line in in_file.read().splitlines()
                     if line.strip()]
    except OSError as error:
        raise CorpusError("can't read traces {}: {}".format(
            path, error.strerror or error)) from None
    if not lines:
        raise CorpusError("trace file {} is empty".format(path))
    results = []
    for line_number, line in enumerate(lines, start=1):
        try:
            data = json.loads(line)
        except json.JSONDecodeError:
            raise CorpusError("{} line {}: malformed JSON".format(
                path, line_number)) from None
        schema = data.get("schema") if isinstance(data, dict) else None
        if schema != TRACE_SCHEMA:
            raise CorpusError("{} line {}: trace schema {!r}, expected "
                              "{!r}".format(path, line_number, schema,
                                            TRACE_SCHEMA))
        try:
            results.append(RefinementResult.from_dict(data))
        except (KeyError, TypeError, ValueError) as error:
            raise CorpusError("{} line {}: bad trace record ({})".format(
                path, line_number, error)) from None
    return results
