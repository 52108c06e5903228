"""HTTP session API: a human (or script) plays the ordinal oracle.

The insertion algorithm is suspended between answers as an explicit,
JSON-serializable state machine.  Every mutation round-trips the plan state
through the store, so sessions survive process restarts by construction.
Per-session mutations are serialized by a lock; distinct sessions are fully
concurrent.
"""

from __future__ import annotations

import json
import os
import threading
import uuid

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .hierarchy import BinaryHierarchy, HierarchyError
from .noiseless import SiblingSearch
from .noisy import RobustSiblingSearch

SESSION_SCHEMA_VERSION = 1
DEFAULT_HUMAN_P = 0.9
DEFAULT_HUMAN_DELTA = 0.1


def _pair_key(pair):
    a, b = sorted(pair)
    return f"{a}|{b}"


def _key_pair(key):
    a, b = key.split("|")
    return frozenset((a, b))


class SessionStore:
    """JSON-file-per-session persistence (in-memory when no path is given)."""

    def __init__(self, path=None):
        self.path = path
        self._mem = {}
        if path:
            os.makedirs(path, exist_ok=True)

    def _file(self, sid):
        return os.path.join(self.path, f"{sid}.json")

    def load(self, sid):
        if self.path:
            try:
                with open(self._file(sid), "r", encoding="utf-8") as fh:
                    return json.load(fh)
            except FileNotFoundError:
                return None
        return self._mem.get(sid)

    def save(self, session):
        if self.path:
            tmp = self._file(session["id"]) + ".tmp"
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(session, fh)
            os.replace(tmp, self._file(session["id"]))
        else:
            self._mem[session["id"]] = session


def _build_plan(session):
    h = BinaryHierarchy.from_table(session["tree"])
    x = session["elements"][session["placed"]]
    state = session["plan"]
    if session["mode"] == "noiseless":
        plan = SiblingSearch.from_state(h, x, state) if state else SiblingSearch(h, x)
    else:
        delta_i = session["delta"] / len(session["elements"])
        plan = RobustSiblingSearch(h, x, session["p"], delta_i, state=state)
    return h, plan


def _fresh_plan(session, h):
    x = session["elements"][session["placed"]]
    if session["mode"] == "noiseless":
        return SiblingSearch(h, x)
    delta_i = session["delta"] / len(session["elements"])
    return RobustSiblingSearch(h, x, session["p"], delta_i)


def _set_pending(session, plan):
    t, k = plan.pending_block()
    session["plan"] = plan.to_state()
    session["block"] = {"triplet": sorted(t), "k": int(k), "counts": {}}


def _advance(session, h, plan):
    """Splice finished insertions and refresh the pending block."""
    while plan.finished:
        v = plan.result()
        session["placed"] += 1
        h.insert_leaf_sibling(v, session["elements"][session["placed"] - 1])
        session["tree"] = h.to_table()
        if session["placed"] >= len(session["elements"]):
            session["done"] = True
            session["plan"] = None
            session["block"] = None
            return
        plan = _fresh_plan(session, h)
    _set_pending(session, plan)


def new_session(elements, mode, p=None, delta=None):
    elements = list(elements)
    if not elements:
        raise HierarchyError("element list must not be empty")
    if len(elements) != len(set(elements)):
        raise HierarchyError("duplicate element labels")
    if mode not in ("noiseless", "noisy"):
        raise HierarchyError(f"unknown mode {mode!r}")
    session = {
        "version": SESSION_SCHEMA_VERSION,
        "id": uuid.uuid4().hex,
        "elements": elements,
        "mode": mode,
        "p": (p if p is not None else DEFAULT_HUMAN_P) if mode == "noisy" else None,
        "delta": (delta if delta is not None else DEFAULT_HUMAN_DELTA) if mode == "noisy" else None,
        "answers": 0,
        "done": False,
        "plan": None,
        "block": None,
    }
    if session["p"] is not None and not (0.5 < session["p"] <= 1.0):
        raise HierarchyError("p must be in (0.5, 1]")
    if len(elements) == 1:
        h = BinaryHierarchy.single(elements[0])
        session["placed"] = 1
        session["tree"] = h.to_table()
        session["done"] = True
        return session
    h = BinaryHierarchy.pair_of(elements[0], elements[1])
    session["placed"] = 2
    session["tree"] = h.to_table()
    if len(elements) == 2:
        session["done"] = True
        return session
    _set_pending(session, _fresh_plan(session, h))
    return session


def apply_answer(session, pair):
    """Feed one human answer; returns the updated session."""
    if session["done"] or session["block"] is None:
        raise LookupError("session has no pending query")
    block = session["block"]
    t = set(block["triplet"])
    pair = list(pair)
    if len(pair) != 2 or len(set(pair)) != 2 or not set(pair) <= t:
        raise HierarchyError("answer must be a pair of two distinct elements of the pending triplet")
    key = _pair_key(pair)
    block["counts"][key] = block["counts"].get(key, 0) + 1
    session["answers"] += 1
    if sum(block["counts"].values()) >= block["k"]:
        h, plan = _build_plan(session)
        plan.feed_counts({_key_pair(k): v for k, v in block["counts"].items()})
        _advance(session, h, plan)
    return session


def session_view(session):
    h = BinaryHierarchy.from_table(session["tree"])
    return {
        "newick": h.to_newick(),
        "json": h.to_json_dict(),
        "queries": session["answers"],
        "placed": session["placed"],
        "total": len(session["elements"]),
        "done": session["done"],
        "mode": session["mode"],
    }


class CreateSessionRequest(BaseModel):
    elements: list[str]
    mode: str = "noiseless"
    p: float | None = None
    delta: float | None = None


class AnswerRequest(BaseModel):
    pair: list[str]


def create_app(store_path=None, ui_path=None):
    app = FastAPI(title="hierq session service")
    store = SessionStore(store_path)
    locks = {}
    locks_guard = threading.Lock()

    def lock_for(sid):
        with locks_guard:
            return locks.setdefault(sid, threading.Lock())

    def get_session_or_404(sid):
        session = store.load(sid)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        try:
            session = new_session(req.elements, req.mode, req.p, req.delta)
        except HierarchyError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        store.save(session)
        return {"id": session["id"], "done": session["done"]}

    @app.get("/sessions/{sid}/query")
    def next_query(sid: str):
        with lock_for(sid):
            session = get_session_or_404(sid)
            if session["done"]:
                return {"done": True}
            return {"triplet": session["block"]["triplet"]}

    @app.post("/sessions/{sid}/answer")
    def answer(sid: str, req: AnswerRequest):
        with lock_for(sid):
            session = get_session_or_404(sid)
            try:
                session = apply_answer(session, req.pair)
            except LookupError as exc:
                raise HTTPException(status_code=409, detail=str(exc)) from exc
            except HierarchyError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            store.save(session)
            return {
                "state": "done" if session["done"] else "awaiting_answer",
                "placed": session["placed"],
                "total": len(session["elements"]),
            }

    @app.get("/sessions/{sid}/tree")
    def tree(sid: str):
        with lock_for(sid):
            session = get_session_or_404(sid)
            return session_view(session)

    if ui_path:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_path, html=True), name="ui")

    return app
