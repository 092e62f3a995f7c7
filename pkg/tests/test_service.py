import itertools

import numpy as np
import pytest
from fastapi.testclient import TestClient

from askless.data import generate_synthetic, default_generator_config
from askless.inference import EXACT, eliminate
from askless.learning import HillClimbConfig, fit_mle, hill_climb
from askless.schema import default_schema
from askless.service import SessionManager, create_app

from dataclasses import replace


@pytest.fixture(scope="module")
def bundled_bn():
    schema = default_schema()
    train = generate_synthetic(schema, replace(default_generator_config(), rows=4000, seed=424))
    dag = hill_climb(train, HillClimbConfig())
    return fit_mle(dag, train, 0.0)


@pytest.fixture()
def client(bundled_bn):
    app = create_app(bundled_bn, default_k=10, engine=EXACT, seed=7)
    return TestClient(app)


class TestEndpoints:
    def test_healthz(self, client):
        response = client.get("/healthz")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"

    def test_create_session(self, client):
        response = client.post("/sessions", json={"k": 10})
        assert response.status_code == 201
        body = response.json()
        assert len(body["questions"]) == 10
        abbrs = [q["abbr"] for q in body["questions"]]
        assert len(set(abbrs)) == 10
        assert sum(body["posterior"].values()) == pytest.approx(1.0, abs=1e-6)
        for q in body["questions"]:
            assert set(q) == {"abbr", "text", "levels"}

    def test_create_session_k_equals_pool(self, client, bundled_bn):
        pool = len(bundled_bn.schema.asked)
        response = client.post("/sessions", json={"k": pool})
        assert response.status_code == 201
        assert len(response.json()["questions"]) == pool

    def test_create_session_k_too_large(self, client):
        assert client.post("/sessions", json={"k": 23}).status_code == 400

    def test_same_seed_same_questions(self, client):
        a = client.post("/sessions", json={"k": 10, "seed": 5}).json()
        b = client.post("/sessions", json={"k": 10, "seed": 5}).json()
        assert [q["abbr"] for q in a["questions"]] == [q["abbr"] for q in b["questions"]]

    def test_answer_flow(self, client):
        created = client.post("/sessions", json={"k": 3, "seed": 1}).json()
        sid = created["id"]
        question = created["questions"][0]["abbr"]
        level = created["questions"][0]["levels"][0]
        response = client.post(f"/sessions/{sid}/answers",
                               json={"question": question, "value": level})
        assert response.status_code == 200
        body = response.json()
        assert body["answeredCount"] == 1
        assert len(body["remaining"]) == 2
        assert body["segment"] in ("S1", "S2", "S3", "S4")
        view = client.get(f"/sessions/{sid}").json()
        assert len(view["posteriorTrace"]) == 2
        assert view["answered"] == {question: level}

    def test_answer_same_question_twice(self, client):
        created = client.post("/sessions", json={"k": 3, "seed": 2}).json()
        sid = created["id"]
        q = created["questions"][0]["abbr"]
        lv = created["questions"][0]["levels"][0]
        assert client.post(f"/sessions/{sid}/answers",
                           json={"question": q, "value": lv}).status_code == 200
        again = client.post(f"/sessions/{sid}/answers",
                            json={"question": q, "value": lv})
        assert again.status_code == 409
        assert again.json()["error"] == "AlreadyAnswered"

    def test_answer_question_not_in_set(self, client, bundled_bn):
        created = client.post("/sessions", json={"k": 3, "seed": 3}).json()
        outside = next(
            q for q in bundled_bn.schema.asked
            if q not in [x["abbr"] for x in created["questions"]]
        )
        response = client.post(f"/sessions/{created['id']}/answers",
                               json={"question": outside, "value": "1"})
        assert response.status_code == 400
        assert response.json()["error"] == "QuestionNotInSet"

    def test_answer_invalid_level(self, client):
        created = client.post("/sessions", json={"k": 3, "seed": 4}).json()
        q = created["questions"][0]["abbr"]
        response = client.post(f"/sessions/{created['id']}/answers",
                               json={"question": q, "value": "not-a-level"})
        assert response.status_code == 400
        assert response.json()["error"] == "InvalidLevel"

    def test_malformed_body(self, client):
        created = client.post("/sessions", json={"k": 3, "seed": 5}).json()
        response = client.post(f"/sessions/{created['id']}/answers",
                               json={"nope": True})
        assert response.status_code == 400

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/deadbeef").status_code == 404
        response = client.post("/sessions/deadbeef/answers",
                               json={"question": "PAM", "value": "1"})
        assert response.status_code == 404

    def test_full_session_view(self, client):
        created = client.post("/sessions", json={"k": 2, "seed": 6}).json()
        sid = created["id"]
        fresh = client.get(f"/sessions/{sid}").json()
        assert len(fresh["remaining"]) == 2
        assert len(fresh["posteriorTrace"]) == 1
        for q in created["questions"]:
            client.post(f"/sessions/{sid}/answers",
                        json={"question": q["abbr"], "value": q["levels"][2]})
        done = client.get(f"/sessions/{sid}").json()
        assert done["remaining"] == []
        assert len(done["posteriorTrace"]) == done["k"] + 1


class TestSessionSemantics:
    def test_batch_equals_incremental(self, bundled_bn):
        manager = SessionManager(bundled_bn, engine=EXACT)
        rng = np.random.default_rng(0)
        session = manager.create_session(k=8, seed=11)
        answers = {}
        for q in session.question_set:
            levels = bundled_bn.schema[q].levels
            answers[q] = levels[int(rng.integers(0, len(levels)))]
        for q in session.question_set:
            final = manager.submit_answer(session.id, q, answers[q])
        merged = eliminate(bundled_bn, "SGV2", answers)
        for level, p in merged.probs.items():
            assert final.probs[level] == pytest.approx(p, abs=1e-9)

    def test_answer_order_invariance(self, bundled_bn):
        manager = SessionManager(bundled_bn, engine=EXACT)
        rng = np.random.default_rng(1)
        base = manager.create_session(k=4, seed=12)
        answers = {}
        for q in base.question_set:
            levels = bundled_bn.schema[q].levels
            answers[q] = levels[int(rng.integers(0, len(levels)))]
        finals = []
        for order in itertools.islice(itertools.permutations(base.question_set), 6):
            session = manager.create_session(k=4, seed=12)
            assert session.question_set == base.question_set
            for q in order:
                post = manager.submit_answer(session.id, q, answers[q])
            finals.append(post.probs)
        for probs in finals[1:]:
            for level in finals[0]:
                assert probs[level] == pytest.approx(finals[0][level], abs=1e-9)

    def test_trace_matches_fresh_queries(self, bundled_bn):
        manager = SessionManager(bundled_bn, engine=EXACT)
        session = manager.create_session(k=5, seed=13)
        answered = {}
        for q in session.question_set:
            level = bundled_bn.schema[q].levels[1]
            manager.submit_answer(session.id, q, level)
            answered[q] = level
        for i, posterior in enumerate(session.posterior_trace):
            prefix = dict(list(answered.items())[:i])
            fresh = eliminate(bundled_bn, "SGV2", prefix)
            for level, p in fresh.probs.items():
                assert posterior.probs[level] == pytest.approx(p, abs=1e-9)

    def test_session_isolation(self, bundled_bn):
        manager = SessionManager(bundled_bn, engine=EXACT)
        s1 = manager.create_session(k=3, seed=14)
        s2 = manager.create_session(k=3, seed=14)
        q = s1.question_set[0]
        manager.submit_answer(s1.id, q, bundled_bn.schema[q].levels[0])
        assert not s2.answered
        assert len(s2.posterior_trace) == 1

    def test_ttl_eviction(self, bundled_bn):
        from askless.errors import UnknownSession

        manager = SessionManager(bundled_bn, engine=EXACT, ttl_hours=0.0)
        session = manager.create_session(k=2, seed=15)
        with pytest.raises(UnknownSession):
            manager.get_session(session.id)

    def test_interleaved_concurrent_sessions(self, bundled_bn):
        from concurrent.futures import ThreadPoolExecutor

        manager = SessionManager(bundled_bn, engine=EXACT)
        rng = np.random.default_rng(50)
        sessions = [manager.create_session(k=6, seed=100 + i) for i in range(8)]
        plans = []
        for session in sessions:
            answers = {}
            for q in session.question_set:
                levels = bundled_bn.schema[q].levels
                answers[q] = levels[int(rng.integers(0, len(levels)))]
            plans.append((session, answers))

        def worker(plan):
            session, answers = plan
            for q, v in answers.items():
                manager.submit_answer(session.id, q, v)
            return session.id

        with ThreadPoolExecutor(max_workers=8) as pool:
            list(pool.map(worker, plans))

        for session, answers in plans:
            assert session.answered == answers
            assert len(session.posterior_trace) == 7
            expected = eliminate(bundled_bn, "SGV2", answers)
            final = session.posterior_trace[-1]
            for level, p in expected.probs.items():
                assert final.probs[level] == pytest.approx(p, abs=1e-9)
