from counterfactual_refiner.corpus import Record
from counterfactual_refiner.generator import (
    GeneratorConfig, MockState, build_generator, generate, mock_refine
)
from counterfactual_refiner.generator.prompts import build_initial_prompt

DOC = Record("d1", "my claim", 0)


def test_appends_one_phrase_per_call():
    state = MockState(("formally", "indeed"))
    prompt = build_initial_prompt(DOC)
    assert mock_refine(state, DOC, prompt) == "my claim formally"
    assert mock_refine(state, DOC, prompt) == "my claim formally indeed"
    # script used up
    assert mock_refine(state, DOC, prompt) == "my claim formally indeed"
    assert state.iteration == 3


def test_empty_script_returns_original():
    session = build_generator(GeneratorConfig()).open_session(DOC)
    prompt = build_initial_prompt(DOC)
    assert generate(session, prompt) == "my claim"


def test_joiner():
    generator = build_generator(GeneratorConfig(script=("a", "b"),
                                                joiner="\n"))
    session = generator.open_session(DOC)
    prompt = build_initial_prompt(DOC)
    generate(session, prompt)
    assert generate(session, prompt) == "my claim\na\nb"


def test_sessions_are_independent():
    generator = build_generator(GeneratorConfig(script=("x",)))
    first = generator.open_session(DOC)
    second = generator.open_session(Record("d2", "other", 0))
    prompt = build_initial_prompt(DOC)
    assert first.generate(prompt).text == "my claim x"
    assert second.generate(prompt).text == "other x"
    assert first.generate(prompt).retries == 0


def test_shuffled_script_is_seeded_per_document():
    script = tuple("p{}".format(i) for i in range(8))
    generator = build_generator(GeneratorConfig(
        script=script, shuffle_script=True, seed=5))
    order = generator.script_for(DOC)
    assert sorted(order) == sorted(script)
    assert generator.script_for(DOC) == order
    again = build_generator(GeneratorConfig(
        script=script, shuffle_script=True, seed=5))
    assert again.script_for(DOC) == order
    assert build_generator(GeneratorConfig(script=script)).script_for(DOC) \
        == script
