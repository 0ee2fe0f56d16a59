"""
Drives one run: loads the corpus and the models a command needs, runs it,
and writes the outputs into the run directory.
"""

import os
import logging

from . import config
from .structures import ValidationError, CorpusError
from .corpus import load_corpus, split_corpus, corpus_stats
from .discriminator import (
    DISCRIMINATOR_KIND_TO_LOADER, train_classifier, evaluate_accuracy,
    save_model
)
from .generator import build_generator, PromptTemplates
from .engine import run_batch, write_traces, read_traces
from .metrics import build_report, load_report, compare_reports

TRACES_NAME = "traces.jsonl"
REPORT_JSON_NAME = "report.json"
REPORT_TEXT_NAME = "report.txt"
WARNINGS_NAME = "warnings.log"


class RunLogHandler(logging.Handler):
    """Collects the warnings and errors logged during a run so they can be
    summarized at the end and written next to the outputs"""

    def __init__(self):
        super().__init__()
        self.setLevel(logging.WARNING)
        self.setFormatter(logging.Formatter("[%(levelname)s]: %(message)s"))
        self.messages = []

    def emit(self, record):
        self.messages.append(self.format(record))


class RefinerRun:
    """One command against one resolved configuration"""

    def __init__(self, settings, progress=True):
        self.settings = settings
        self.progress = progress
        self.out_dir = settings["run"]["out_dir"]
        self.log_handler = RunLogHandler()
        self.writes_outputs = False

    def __enter__(self):
        logging.getLogger().addHandler(self.log_handler)
        return self

    def __exit__(self, *exc):
        logging.getLogger().removeHandler(self.log_handler)
        messages = self.log_handler.messages
        if messages:
            logging.info("Finished with %d warnings", len(messages))
            if self.writes_outputs:
                with open(os.path.join(self.out_dir, WARNINGS_NAME), "w",
                          encoding="utf-8") as out_file:
                    out_file.write("\n".join(messages) + "\n")

    def output_path(self, name):
        """Path of an output file in the run directory"""
        return os.path.join(self.out_dir, name)

    def _prepare_out_dir(self):
        os.makedirs(self.out_dir, exist_ok=True)
        self.writes_outputs = True
        config.write_snapshot(self.settings, self.out_dir)

    def load_corpus(self):
        """Corpus named in [corpus]"""
        section = self.settings["corpus"]
        if not section["path"]:
            raise ValidationError("corpus.path is not set")
        return load_corpus(section["path"], section["schema"],
                           config.label_names(self.settings),
                           section["label_aliases"] or None,
                           section["fold_other"])

    def split(self, corpus):
        """Seeded train/validation/test split"""
        return split_corpus(corpus, self.settings["corpus"]["ratios"],
                            self.settings["run"]["seed"])

    def load_scorer(self, label_names):
        """Discriminator named in [discriminator]"""
        section = dict(self.settings["discriminator"])
        section["model_path"] = config.model_path(self.settings)
        return DISCRIMINATOR_KIND_TO_LOADER[section["kind"]](section,
                                                             label_names)

    def train(self):
        """Fit the built-in discriminator and write model.bin"""
        if self.settings["discriminator"]["kind"] != "builtin":
            raise ValidationError("only the builtin discriminator can be "
                                  "trained")
        train_config = config.train_config(self.settings)
        tokenizer_config = config.tokenizer_config(self.settings)
        input_fields = tuple(self.settings["discriminator"]["input_fields"])

        train, val, test = self.split(self.load_corpus())
        logging.info("Split into %d train, %d validation, %d test",
                     len(train), len(val), len(test))
        model = train_classifier(train, val, train_config, tokenizer_config,
                                 input_fields)
        accuracy = evaluate_accuracy(model, val if len(val) else train,
                                     input_fields)
        print("validation accuracy {:.4f}".format(accuracy))
        if len(test):
            logging.info("Test accuracy %.4f",
                         evaluate_accuracy(model, test, input_fields))

        self._prepare_out_dir()
        path = config.model_path(self.settings)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        save_model(model, path)
        logging.info("Wrote %s", path)
        return accuracy

    def refine(self, untargeted=False):
        """Refine every eligible document of the configured split"""
        corpus = self.load_corpus()
        if self.settings["corpus"]["split"] == "test":
            corpus = self.split(corpus)[2]
        scorer = self.load_scorer(corpus.label_names)
        if tuple(scorer.label_names) != tuple(corpus.label_names):
            raise CorpusError("corpus labels {} don't match the "
                              "discriminator's {}".format(
                                  list(corpus.label_names),
                                  list(scorer.label_names)))
        engine_config = config.engine_config(self.settings,
                                             scorer.label_names, untargeted)
        generator = build_generator(config.generator_config(self.settings))
        generator.preflight()
        template_dir = self.settings["generator"]["template_dir"]
        templates = PromptTemplates.load(template_dir) if template_dir \
            else None

        self._prepare_out_dir()
        results = run_batch(corpus, scorer, generator, engine_config,
                            self.settings["run"]["parallelism"],
                            templates=templates, progress=self.progress)
        if not results:
            if untargeted:
                raise CorpusError(
                    "no eligible documents: the discriminator misclassifies "
                    "every document of the split, nothing to attack")
            raise CorpusError(
                "no eligible documents: every document of the split is "
                "already predicted as the target")
        write_traces(results, self.output_path(TRACES_NAME))
        return self._write_report(results, scorer, generator.identity())

    def attack(self):
        """Untargeted refinement of correctly classified documents"""
        return self.refine(untargeted=True)

    def _write_report(self, results, scorer, generator_identity):
        model = scorer if scorer.kind == "builtin" else None
        report = build_report(
            results,
            config.embedding_provider(self.settings, model),
            strategy=self.settings["engine"]["strategy"],
            generator=generator_identity,
            discriminator=scorer.identity(),
        )
        with open(self.output_path(REPORT_JSON_NAME), "w",
                  encoding="utf-8") as out_file:
            out_file.write(report.to_json())
        text = report.to_text()
        with open(self.output_path(REPORT_TEXT_NAME), "w",
                  encoding="utf-8") as out_file:
            out_file.write(text)
        print(text, end="")
        return report

    def report(self, traces_path=None):
        """Recompute the report of a finished run from its traces"""
        results = read_traces(traces_path or self.output_path(TRACES_NAME))
        label_names = config.label_names(self.settings)
        scorer = self.load_scorer(label_names or ())
        generator_identity = config.generator_config(
            self.settings, interpolate=False).identity()
        os.makedirs(self.out_dir, exist_ok=True)
        self.writes_outputs = True
        return self._write_report(results, scorer, generator_identity)

    def stats(self):
        """Size and length statistics of the configured corpus"""
        stats = corpus_stats(self.load_corpus())
        print(stats.to_string())
        return stats


def compare(report_paths):
    """Side by side table of several report.json files"""
    text = compare_reports([load_report(path) for path in report_paths])
    print(text, end="")
    return text


COMMAND_TO_METHOD = {
    "train": RefinerRun.train,
    "refine": RefinerRun.refine,
    "attack": RefinerRun.attack,
    "report": RefinerRun.report,
    "stats": RefinerRun.stats,
}


def execute(command, settings, progress=True, **kwargs):
    """Run one command with the run log handler attached"""
    with RefinerRun(settings, progress) as run:
        return COMMAND_TO_METHOD[command](run, **kwargs)
