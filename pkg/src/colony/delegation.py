"""Delegation schemes: tools through which agents spawn and await sub-agents.

Two schemes ship with the framework, mirroring process-management idioms:

* ``DelegateOne`` blocks the parent until the child returns its result; when
  a model issues several delegate calls in one message the children run in
  parallel and the results come back together.
* ``DelegateWait`` spawns the child immediately and returns its id; a
  separate ``wait`` function retrieves the result later. Children whose
  results are never retrieved are zombies; they are cancelled when the root
  round completes and flagged with a ``delegation_cancelled`` event.

A scheme owns the lifecycle of every agent it creates. Custom schemes
subclass :class:`DelegationScheme` and expose their own tool functions.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .agents import Agent, RunState
from .errors import AgentRunError, SpawnRefused
from .events import Event, register_custom_event
from .tools import ToolParam, ToolSpec

if TYPE_CHECKING:
    from .session import Session

logger = logging.getLogger(__name__)

#: logged when an unretrieved child is cancelled at round completion
DELEGATION_CANCELLED = "delegation_cancelled"
register_custom_event(DELEGATION_CANCELLED)

IDENTICAL_INSTRUCTIONS_REFUSAL = (
    "You may not delegate the same instructions that were given to you. "
    "Either attempt the task yourself or break it into smaller pieces "
    "before delegating again."
)


def normalize_instructions(text: str) -> str:
    """Case-fold and collapse all whitespace runs to single spaces."""
    return " ".join(text.split()).casefold()


@dataclass
class GuardVerdict:
    """Outcome of the identical-delegation check."""

    allowed: bool
    refusal_message: str | None = None

    def __post_init__(self):
        if not self.allowed and not self.refusal_message:
            raise ValueError("refused verdicts must carry a refusal message")


def guard_check(parent_instructions: str, new_instructions: str) -> GuardVerdict:
    """Refuse delegations whose instructions match the parent's own.

    Comparison is exact equality after normalization; instructions that
    differ in case or whitespace only still count as identical. The refusal
    text is meant to be returned to the model as the tool result.
    """
    if normalize_instructions(parent_instructions) == normalize_instructions(
        new_instructions
    ):
        return GuardVerdict(allowed=False, refusal_message=IDENTICAL_INSTRUCTIONS_REFUSAL)
    return GuardVerdict(allowed=True)


@dataclass
class PendingChild:
    """Bookkeeping for one deferred delegation."""

    child: str
    instructions: str
    result: str | None = None
    retrieved: bool = False
    cancelled: bool = False
    task: asyncio.Task | None = field(default=None, repr=False, compare=False)


class DelegationScheme:
    """Contract for delegation tools.

    A scheme instance is bound to one host agent. It can request new
    delegate agents from the session, exposes tool functions to the model,
    and is responsible for cleaning up every agent it created.
    """

    #: prompt text shown to the model for the delegate function; override or
    #: pass ``delegate_description`` to customize
    delegate_description = (
        "Delegate a task to a sub-agent. Give complete, self-contained "
        "instructions for the task you want done."
    )

    def __init__(self, session: "Session", host: Agent, *, delegate_description: str | None = None):
        self.session = session
        self.host = host
        if delegate_description is not None:
            self.delegate_description = delegate_description

    def tool_specs(self) -> list[ToolSpec]:
        """The functions this scheme exposes to its host's model."""
        raise NotImplementedError

    def pending_children(self) -> list[PendingChild]:
        """Deferred-delegation records, if the scheme keeps any."""
        return []

    async def cancel_unretrieved(self) -> None:
        """Cancel and clean up created agents whose results were never taken."""

    def _spawn(self, instructions: str) -> Agent | str:
        """Guard-check and spawn a delegate; a str return is a refusal."""
        received = self.host.received_instructions
        if received is not None:
            verdict = guard_check(received, instructions)
            if not verdict.allowed:
                return verdict.refusal_message
        try:
            return self.session.spawn_agent(
                parent=self.host.id, instructions_context=instructions
            )
        except SpawnRefused as exc:
            return str(exc)

    async def _run_child(self, child: Agent, instructions: str) -> str:
        """Run the child's round and reduce it to the delegate's result text.

        The result is every non-empty ASSISTANT message content the child
        produced, joined with newlines. A child failure becomes error text
        for the parent's model rather than an exception.
        """
        try:
            messages = await child.full_round(instructions)
        except AgentRunError as exc:
            return f"The delegate failed with an error: {exc.cause}"
        return child.assistant_reply(messages)


class DelegateOne(DelegationScheme):
    """Block the parent until the child agent returns its result."""

    def tool_specs(self) -> list[ToolSpec]:
        return [
            ToolSpec(
                name="delegate",
                description=self.delegate_description,
                params=[
                    ToolParam(
                        "instructions",
                        "string",
                        description="Complete instructions for the sub-agent.",
                    )
                ],
                executor=self.delegate,
            )
        ]

    async def delegate(self, instructions: str) -> str:
        spawned = self._spawn(instructions)
        if isinstance(spawned, str):
            return spawned
        child = spawned
        try:
            async with self.host.run_state(RunState.WAITING):
                return await self._run_child(child, instructions)
        finally:
            await self.session.cleanup(child.id)


class DelegateWait(DelegationScheme):
    """Spawn now, retrieve later; suited to models without parallel calls."""

    wait_description = (
        "Wait for a delegated sub-agent to finish and return its result. "
        "Pass the agent id you received when delegating."
    )

    def __init__(self, session, host, *, delegate_description=None, wait_description=None):
        super().__init__(session, host, delegate_description=delegate_description)
        if wait_description is not None:
            self.wait_description = wait_description
        self.pending: dict[str, PendingChild] = {}

    def tool_specs(self) -> list[ToolSpec]:
        return [
            ToolSpec(
                name="delegate",
                description=self.delegate_description
                + " Returns the id of the new agent; use wait to collect its result.",
                params=[
                    ToolParam(
                        "instructions",
                        "string",
                        description="Complete instructions for the sub-agent.",
                    )
                ],
                executor=self.delegate,
            ),
            ToolSpec(
                name="wait",
                description=self.wait_description,
                params=[
                    ToolParam("child_id", "string", description="Id of the delegate to wait for.")
                ],
                executor=self.wait,
            ),
        ]

    def pending_children(self) -> list[PendingChild]:
        return list(self.pending.values())

    async def delegate(self, instructions: str) -> str:
        spawned = self._spawn(instructions)
        if isinstance(spawned, str):
            return spawned
        child = spawned
        record = PendingChild(child=child.id, instructions=instructions)
        record.task = asyncio.create_task(self._run_child(child, instructions))
        self.pending[child.id] = record
        return child.id

    async def wait(self, child_id: str) -> str:
        record = self.pending.get(child_id)
        if record is None:
            return f"error: no delegate of yours has id {child_id!r}"
        if record.retrieved:
            return record.result or ""
        if record.cancelled:
            return f"error: delegate {child_id} was cancelled"
        assert record.task is not None
        if record.task.done():
            result = record.task.result()
        else:
            async with self.host.run_state(RunState.WAITING):
                result = await record.task
        record.result = result
        record.retrieved = True
        await self.session.cleanup(child_id)
        return result

    async def cancel_unretrieved(self) -> None:
        for record in list(self.pending.values()):
            if record.retrieved or record.cancelled:
                continue
            record.cancelled = True
            task = record.task
            if task is not None and not task.done():
                task.cancel()
                try:
                    await task
                except (asyncio.CancelledError, AgentRunError):
                    pass
            self.session.dispatch(
                Event(
                    DELEGATION_CANCELLED,
                    data={"id": record.child, "parent": self.host.id},
                )
            )
            await self.session.cleanup(record.child)


SCHEMES: dict[str, type[DelegationScheme]] = {
    "one": DelegateOne,
    "wait": DelegateWait,
}


def make_scheme(name: str, session: "Session", host: Agent) -> DelegationScheme:
    try:
        scheme_cls = SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown delegation scheme {name!r}") from None
    return scheme_cls(session, host)


def zombie_report(session: "Session") -> list[PendingChild]:
    """All deferred delegations whose results were never retrieved."""
    report = []
    for scheme in session.schemes.values():
        for record in scheme.pending_children():
            if not record.retrieved:
                report.append(record)
    return report
