"""Acceptance gate: one test per headline behavior, with stated budgets.

Each test prints a single ``criterion NN PASS/FAIL`` line; under ``pytest -v``
the per-test result lines double as the same record.
"""

import random
import time

from rulewiki.engine import Query, solve
from rulewiki.explain import Explainer, render
from rulewiki.menus import build_menu, search
from rulewiki.naive import solve_reference
from rulewiki.rulebook import parse_rulebase, parse_sentence
from rulewiki.sqlgen import (
    compile_sql,
    default_mappings,
    embedded_client,
    run_hybrid,
)
from rulewiki.validation import check_rulebase_safety, stratify

from bruteforce import (
    random_rulebase,
    random_supply_case,
    round2,
    shuffle_blocks,
    universal_part_of,
)
from conftest import GOLDEN, QUESTIONS, answer_texts, fixture_source

ALL_FIXTURES = ["fixture1", "fixture2", "fixture3", "fixture4", "fixture5"]


class criterion:
    """Times a criterion body and prints its pass/fail line."""

    def __init__(self, number, budget_seconds, label):
        self.number = number
        self.budget = budget_seconds
        self.label = label

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        verdict = "PASS" if exc_type is None and elapsed < self.budget else "FAIL"
        print(
            f"criterion {self.number:02d} {verdict} "
            f"({elapsed:.2f}s of {self.budget:.0f}s) {self.label}"
        )
        if exc_type is None:
            assert elapsed < self.budget, (
                f"criterion {self.number} exceeded its "
                f"{self.budget}s budget: {elapsed:.2f}s"
            )
        return False


def ask_texts(source, question):
    return answer_texts(solve(parse_rulebase(source), Query(parse_sentence(question))))


def test_criterion_01_author_row_with_proof():
    with criterion(1, 1.0, "author question: exact row and proof layout"):
        source = fixture_source("fixture2")
        rb = parse_rulebase(source)
        table = solve(rb, Query(parse_sentence(QUESTIONS["fixture2"])))
        assert answer_texts(table) == [
            (
                "Jeen Broekstra",
                "jbroeks@cs.vu.nl",
                "An Overview of RDF Query Languages",
            )
        ]
        proof = Explainer(rb).explain(table.row_facts[0])
        assert render(proof) + "\n" == (GOLDEN / "fixture2_proof.txt").read_text()


def test_criterion_02_author_failure_explanation():
    with criterion(2, 1.0, "author question: why-not for an absent author"):
        rb = parse_rulebase(fixture_source("fixture2"))
        node = Explainer(rb).explain_failure(
            parse_sentence(
                "Adrian Walker is an author , with email some-email , "
                "of some-title"
            )
        )
        text = render(node)
        assert text + "\n" == (GOLDEN / "fixture2_failure.txt").read_text()
        lines = text.splitlines()
        assert lines[3].endswith("fact#:name to Adrian Walker [missing]")
        assert lines[4].endswith("fact#:email to some-email [missing]")
        assert lines[-1].endswith("[not shown]")


def test_criterion_03_distinct_members_match_oracle():
    with criterion(3, 1.0, "distinct-collection question: 3 rows == oracle"):
        rb = parse_rulebase(fixture_source("fixture3"))
        q = Query(parse_sentence(QUESTIONS["fixture3"]))
        table = solve(rb, q)
        assert len(table.rows) == 3
        assert set(answer_texts(table)) == {
            ("__diff", "ex:Fruit", "ex:Apple"),
            ("__diff", "ex:Fruit", "ex:Banana"),
            ("__diff", "ex:Fruit", "ex:Cherry"),
        }
        assert table.rows == solve_reference(rb, q).rows


def test_criterion_04_supply_fractions():
    with criterion(4, 1.0, "supply fractions: exact rounding, sums near 1"):
        rows = set(ask_texts(fixture_source("fixture4"), QUESTIONS["fixture4"]))
        assert rows == {
            ("d1", "0.60", "y-base", "Bayway"),
            ("d1", "0.40", "y-base", "Delaware City"),
        }
        rng = random.Random(404)
        for _ in range(20):
            source, info = random_supply_case(rng)
            got = {
                row[3]: row[1]
                for row in ask_texts(source, info["question"])
            }
            assert got == info["fractions"]
            drift = abs(sum(float(f) for f in got.values()) - 1.0)
            assert drift <= 0.01 * info["n_refineries"]


def _fixture5_relations(rb):
    by_heading = {t.heading.text: t for t in rb.tables}
    rows = lambda key: [
        tuple(v.text for v in row) for row in by_heading[key].rows
    ]
    return (
        rows("some-C and some-C1 are two different Non-process classes with instances"),
        rows("some-c is an instance of some-C at time some-t"),
        rows("some-c part_of some-c1 at some-t"),
    )


def test_criterion_05_universal_quantification():
    with criterion(5, 1.0, "class-level part_of == quantifier sweep, both ways"):
        source = fixture_source("fixture5")
        toggled = source + (
            "\nsome-c is an instance of some-C at time some-t\n"
            "==============================================\n"
            "n2 | Nucleus | t1\n"
        )
        for text in (source, toggled):
            rb = parse_rulebase(text)
            got = ask_texts(text, QUESTIONS["fixture5"])
            expected = universal_part_of(*_fixture5_relations(rb))
            assert sorted(got) == sorted(expected)
        assert ask_texts(source, QUESTIONS["fixture5"]) == [("Nucleus", "Cell")]
        assert ask_texts(toggled, QUESTIONS["fixture5"]) == []


def test_criterion_06_rule_order_never_matters():
    with criterion(6, 60.0, "100 block permutations per rulebase, same answers"):
        for name in ALL_FIXTURES:
            source = fixture_source(name)
            question = QUESTIONS[name]
            baseline = sorted(ask_texts(source, question))
            rng = random.Random(6)
            for _ in range(100):
                shuffled = shuffle_blocks(source, rng)
                assert sorted(ask_texts(shuffled, question)) == baseline, (
                    f"{name}: permuted source changed the answer set"
                )


def test_criterion_07_random_rulebases_match_reference():
    with criterion(7, 60.0, "200 random rulebases: engine == naive oracle"):
        for seed in range(200):
            rng = random.Random(seed)
            source, questions = random_rulebase(
                rng, recursion=(seed % 3 == 0)
            )
            rb = parse_rulebase(source)
            assert check_rulebase_safety(rb).is_safe
            assert stratify(rb).is_stratified
            for question in questions:
                q = Query(parse_sentence(question))
                assert solve(rb, q).rows == solve_reference(rb, q).rows, (
                    f"seed {seed}: {question!r}"
                )


def test_criterion_08_hybrid_sql_matches_engine():
    with criterion(8, 120.0, "hybrid SQL == engine on fixtures and 100 cases"):
        for name in ("fixture1", "fixture2", "fixture4"):
            rb = parse_rulebase(fixture_source(name))
            maps = default_mappings(rb)
            q = Query(parse_sentence(QUESTIONS[name]))
            plan = compile_sql(rb, q, maps)
            table = run_hybrid(plan, embedded_client(rb, maps))
            assert table.rows == solve(rb, q).rows, name
            if name == "fixture4":
                assert "UNION" in plan.sql
                assert "SUM(" in plan.sql and "GROUP BY" in plan.sql
        for seed in range(100):
            rng = random.Random(1000 + seed)
            source, questions = random_rulebase(rng, recursion=False)
            rb = parse_rulebase(source)
            maps = default_mappings(rb)
            client = embedded_client(rb, maps)
            for question in questions:
                q = Query(parse_sentence(question))
                plan = compile_sql(rb, q, maps)
                assert run_hybrid(plan, client).rows == solve(rb, q).rows, (
                    f"seed {1000 + seed}: {question!r}"
                )


def test_criterion_09_bad_rulebases_rejected_precisely():
    with criterion(9, 60.0, "cycles and unbound variables named exactly"):
        self_cycle = parse_rulebase(
            "some-t is a town\n=====\nspringfield\n\n"
            "some-t is a town\nnot : that-t is dry\n-----\nthat-t is dry\n"
        )
        st = stratify(self_cycle)
        assert not st.is_stratified
        assert st.render().splitlines() == [
            "ERROR these rules make a conclusion depend on its own negation:",
            "  rule@5-8 that-t is dry",
        ]

        pair_cycle = parse_rulebase(
            "some-t is a town\n=====\nspringfield\n\n"
            "some-t is a town\nnot : that-t is wet\n-----\nthat-t is dry\n\n"
            "some-t is a town\nnot : that-t is dry\n-----\nthat-t is wet\n"
        )
        st2 = stratify(pair_cycle)
        assert not st2.is_stratified
        assert st2.render().splitlines() == [
            "ERROR these rules make a conclusion depend on its own negation:",
            "  rule@5-8 that-t is dry",
            "  rule@10-13 that-t is wet",
        ]

        unbound = parse_rulebase(
            "some-a likes some-b\n=====\nada | bo\n\n"
            "some-x likes some-b\n-----\nthat-x meets some-stranger\n"
        )
        report = check_rulebase_safety(unbound)
        assert not report.is_safe
        assert report.render() == (
            "ERROR rule@5-7 stranger a conclusion variable must appear in a "
            "plain premise of the same rule (or be a computed result)"
        )


def test_criterion_10_menus_guide_to_questions():
    with criterion(10, 60.0, "layered menus and keyword search"):
        rb4 = parse_rulebase(fixture_source("fixture4"))
        layers = build_menu(rb4)
        top = [p.generalized_text() for p in layers[0].entries]
        assert QUESTIONS["fixture4"] in top
        seen = set()
        for layer in layers:
            for pattern in layer.entries:
                text = pattern.generalized_text()
                assert text not in seen, f"{text} listed twice"
                seen.add(text)

        rb2 = parse_rulebase(fixture_source("fixture2"))
        hits = search(rb2, "authors email")
        assert hits[0].pattern.generalized_text() == QUESTIONS["fixture2"]
