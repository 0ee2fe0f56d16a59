"""Prompt construction. The wording lives in plain text templates with
{placeholder} fields; the defaults ship in templates/ and any of them can be
replaced from a directory named in the config."""
import os
import functools
import string
import logging
from dataclasses import dataclass

from ..structures import TemplateError

DEFAULT_TEMPLATE_DIR = os.path.join(os.path.dirname(__file__), "templates")

REINFORCEMENT = "reinforcement"
REJECTION = "rejection"

CUE_SENTENCES = {
    REINFORCEMENT: "Your revision moved the assessment toward the target, "
                   "continue strengthening it.",
    REJECTION: "Your revision was rejected, change approach.",
}

# template name -> (allowed placeholders, placeholders that must appear)
TEMPLATE_FIELDS = {
    "system": ({"instruction"}, set()),
    "initial": ({"instruction", "original"}, {"original"}),
    "feedback": ({"instruction", "original", "history", "last_candidate",
                  "prev_p", "cur_p", "cue"}, {"original"}),
}


@dataclass(frozen=True)
class PromptBundle:
    """System and user text of one generator call. `history` keeps the
    (candidate, feedback) pairs that were rendered into the user text."""
    system: str
    user: str
    history: tuple = ()

    def messages(self):
        """Chat messages in wire order"""
        return [{"role": "system", "content": self.system},
                {"role": "user", "content": self.user}]


@dataclass(frozen=True)
class FeedbackCue:
    """Whether the last revision moved the goal score up"""
    previous_probability: float
    current_probability: float
    direction: str

    @classmethod
    def between(cls, previous, current):
        """Reinforce strict improvement, reject everything else"""
        direction = REINFORCEMENT if current > previous else REJECTION
        return cls(float(previous), float(current), direction)

    @property
    def sentence(self):
        """The cue as it appears in the prompt"""
        return CUE_SENTENCES[self.direction]


@dataclass(frozen=True)
class TaskDescriptor:
    """What the rewrite should achieve. target_label is the class name of a
    targeted goal, None for untargeted."""
    schema: str = "findr"
    target_label: str = "reasonable"

    def instruction(self):
        """Instruction sentence for this task"""
        if self.target_label is None:
            return ("Rewrite the text below so its category changes while "
                    "preserving fluency.")
        if self.schema == "findr":
            return ("Transform the informal claim below into formal, "
                    "persuasive legal text that preserves all facts.")
        return ("Rewrite the text below so that it reads as {} while "
                "preserving fluency.".format(self.target_label))


DEFAULT_TASK = TaskDescriptor()


def check_template(name, text):
    """Fail on placeholders the template may not use, or required ones it
    lacks"""
    allowed, required = TEMPLATE_FIELDS[name]
    found = set()
    try:
        for _, field_name, _, _ in string.Formatter().parse(text):
            if field_name is None:
                continue
            if field_name not in allowed:
                raise TemplateError(
                    "template {!r} uses unknown placeholder {{{}}}".format(
                        name, field_name))
            found.add(field_name)
    except ValueError as error:
        raise TemplateError("template {!r} is malformed: {}".format(
            name, error)) from None
    missing = required - found
    if missing:
        raise TemplateError("template {!r} lacks {}".format(
            name, ", ".join("{" + m + "}" for m in sorted(missing))))
    return text


class PromptTemplates:
    """The three templates, checked when loaded"""
    def __init__(self, system, initial, feedback):
        self.system = check_template("system", system).strip()
        self.initial = check_template("initial", initial).rstrip("\n")
        self.feedback = check_template("feedback", feedback).rstrip("\n")

    @classmethod
    def load(cls, template_dir=None):
        """Read templates, files missing from template_dir come from the
        shipped defaults"""
        texts = {}
        for name in TEMPLATE_FIELDS:
            path = os.path.join(DEFAULT_TEMPLATE_DIR, name + ".txt")
            if template_dir:
                override = os.path.join(template_dir, name + ".txt")
                if os.path.isfile(override):
                    logging.info("Using prompt template %s", override)
                    path = override
            try:
                with open(path, "r", encoding="utf-8") as template_file:
                    texts[name] = template_file.read()
            except OSError as error:
                raise TemplateError("can't read template {}: {}".format(
                    path, error.strerror or error)) from None
        return cls(**texts)


@functools.lru_cache(maxsize=1)  # Cache it so the files are read once
def default_templates():
    """Shipped templates"""
    return PromptTemplates.load()


def _system_text(task, templates):
    return templates.system.format(instruction=task.instruction())


def build_initial_prompt(doc, task=DEFAULT_TASK, templates=None):
    """First prompt: the original text and the instruction, nothing from
    the classifier yet"""
    templates = templates or default_templates()
    user = templates.initial.format(
        instruction=task.instruction(), original=doc.claim)
    return PromptBundle(_system_text(task, templates), user)


def _render_history(pairs):
    blocks = []
    for number, (candidate, feedback) in enumerate(pairs, start=1):
        blocks.append("Revision {}:\n{}\nFeedback: {}\n\n".format(
            number, candidate, feedback))
    return "".join(blocks)


def build_feedback_prompt(doc, trace, cue, task=DEFAULT_TASK, templates=None,
                          full_history=False):
    """Prompt after a rejected or improvable revision. Embeds the latest
    candidate and both scores; with full_history the earlier revisions and
    the feedback they got come first."""
    if not trace.iterations:
        raise ValueError("feedback needs at least one iteration")
    templates = templates or default_templates()
    last = trace.iterations[-1]

    history = ()
    if full_history:
        history = tuple(
            (it.candidate_text, CUE_SENTENCES.get(it.feedback_sent, "none"))
            for it in trace.iterations[:-1])

    user = templates.feedback.format(
        instruction=task.instruction(),
        original=doc.claim,
        history=_render_history(history),
        last_candidate=last.candidate_text,
        prev_p="{:.3f}".format(cue.previous_probability),
        cur_p="{:.3f}".format(cue.current_probability),
        cue=cue.sentence,
    )
    return PromptBundle(_system_text(task, templates), user,
                        history)
