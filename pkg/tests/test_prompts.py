import pytest

from counterfactual_refiner.corpus import Record
from counterfactual_refiner.engine import RefinementTrace, Iteration
from counterfactual_refiner.generator import (
    PromptTemplates, FeedbackCue, TaskDescriptor, build_initial_prompt,
    build_feedback_prompt, REINFORCEMENT, REJECTION
)
from counterfactual_refiner.generator.prompts import check_template
from counterfactual_refiner.structures import Verdict, TemplateError

DOC = Record("d1", "They charged me twice  and won't refund!\n", 0)


def trace_with(*candidates):
    trace = RefinementTrace("d1", DOC.claim,
                            Verdict.from_probabilities((0.9, 0.1)), 0.1)
    for index, (text, score) in enumerate(candidates, start=1):
        trace.iterations.append(Iteration(
            index, text, Verdict.from_probabilities((1 - score, score)),
            score, REJECTION))
    return trace


def test_initial_prompt_holds_original_verbatim():
    prompt = build_initial_prompt(DOC)
    assert DOC.claim in prompt.user
    assert "formal, persuasive legal text" in prompt.user
    assert "formal, persuasive legal text" in prompt.system
    assert [m["role"] for m in prompt.messages()] == ["system", "user"]


def test_feedback_prompt_carries_scores_and_cue():
    trace = trace_with(("first try", 0.2689414213699951))
    cue = FeedbackCue.between(0.04742587317756678, 0.2689414213699951)
    prompt = build_feedback_prompt(DOC, trace, cue)
    assert cue.direction == REINFORCEMENT
    assert DOC.claim in prompt.user
    assert "first try" in prompt.user
    assert "0.047" in prompt.user and "0.269" in prompt.user
    assert cue.sentence in prompt.user
    assert prompt.history == ()


def test_full_history_lists_earlier_revisions():
    trace = trace_with(("one", 0.3), ("two", 0.2))
    cue = FeedbackCue.between(0.3, 0.2)
    prompt = build_feedback_prompt(DOC, trace, cue, full_history=True)
    assert "Revision 1:\none" in prompt.user
    assert len(prompt.history) == 1
    assert prompt.user.index("one") < prompt.user.index("two")


def test_feedback_needs_an_iteration():
    with pytest.raises(ValueError):
        build_feedback_prompt(DOC, trace_with(), FeedbackCue.between(0, 0))


def test_cue_direction_is_strict():
    assert FeedbackCue.between(0.4, 0.4).direction == REJECTION
    assert FeedbackCue.between(0.4, 0.3).direction == REJECTION
    assert FeedbackCue.between(0.4, 0.41).direction == REINFORCEMENT


def test_task_instructions():
    assert "category changes" in TaskDescriptor("findr", None).instruction()
    assert "reads as positive" in \
        TaskDescriptor("short_text", "positive").instruction()


def test_template_checks():
    with pytest.raises(TemplateError):
        check_template("initial", "{instruction} {secret}")
    with pytest.raises(TemplateError):
        check_template("initial", "no original here")
    with pytest.raises(TemplateError):
        check_template("feedback", "{original")


def test_template_dir_overrides_single_file(tmp_path):
    (tmp_path / "initial.txt").write_text("REWRITE:\n{original}\n")
    templates = PromptTemplates.load(str(tmp_path))
    prompt = build_initial_prompt(DOC, templates=templates)
    assert prompt.user.startswith("REWRITE:\n")
    assert DOC.claim in prompt.user
    assert templates.feedback == PromptTemplates.load().feedback
