#!/usr/bin/env python3
"""Writes the replay fixtures for the five-entry regression suite.

One JSON-lines file per (configuration, entry) under data/fixtures/suite.
Each record is a canned model reply keyed by role and per-role call index.
"""

import argparse
import json
import pathlib

CONFIGS = ["full", "noperc", "noplan", "norefl", "direct"]
ENTRIES = ["b01", "b27", "b09-v1", "b04-v5", "b09-v6"]


def act(kind, **params):
    return "ACTION " + kind + "".join(f" | {k}={v}" for k, v in params.items())


def perception(observation, entities, chat="none"):
    return f"OBSERVATION:\n{observation}\nTASK ENTITIES:\n{entities}\nACTIVE CHAT:\n{chat}"


def plan(completed, *roadmap):
    if not roadmap:
        return f"COMPLETED:\n{completed}\nROADMAP: done"
    items = "\n".join(f"{i}. {r}" for i, r in enumerate(roadmap, 1))
    return f"COMPLETED:\n{completed}\nROADMAP:\n{items}"


def decision(thought, *actions):
    return "\n".join([thought, *actions])


class Fixture:
    def __init__(self, config):
        self.config = config
        self.records = []
        self.counts = {}

    def add(self, role, text):
        index = self.counts.get(role, 0)
        self.counts[role] = index + 1
        self.records.append({"role": role, "index": index, "response": text})

    def step(self, perceive=None, planned=None, decide=None, reflect=None):
        """Adds one step's replies, skipping modules the configuration turns off."""
        if perceive is not None and self.config != "noperc":
            self.add("perception", perceive)
        if planned is not None and self.config != "noplan":
            self.add("planning", planned)
        self.add("decision", decide)
        if reflect is not None and self.config != "norefl":
            self.add("reflection", reflect)


# --- b01: L1, Lee borrows Wu's pen -------------------------------------------------

def pickup_and_return(f, owner, requester, item, start_done, steps_done):
    """Move to the owner, collect through the locker, deliver, stop."""
    f.step(perception(f"{owner} agreed to lend the {item}.", f"{owner}: holds the {item}\n{requester}: requester"),
           plan(start_done, f"Go to {owner} and send the locker code", f"Collect the {item}",
                f"Bring the {item} to {requester}"),
           decision(f"{owner} agreed, so drive over and send the code.",
                    act("Move", target_name=owner), act("SendQRCode", contact=owner)),
           f"Y\nThe robot reached {owner} and the code was sent.")
    f.step(perception(f"The robot is at {owner}'s desk and the code is out.", f"{owner}: has the locker code"),
           plan(f"{start_done} Robot at {owner}.", f"Wait for {owner} to load the {item}",
                f"Bring the {item} to {requester}"),
           decision(f"Wait for {owner} to scan the code.", act("WaitInPlace", user=owner)),
           f"Y\n{owner} scanned the code and put the {item} in the locker.")
    f.step(perception(f"The {item} is in the locker.", f"{requester}: waiting for the {item}"),
           plan(f"{start_done} {item.capitalize()} collected.", f"Tell {requester} and deliver the {item}"),
           decision(f"Let {requester} know, then drive over and send the code.",
                    act("Inform", contact=requester, content=f"I have the {item} and am on my way to you."),
                    act("Move", target_name=requester), act("SendQRCode", contact=requester)),
           f"Y\n{requester} was told and the robot arrived with the code sent.")
    f.step(perception(f"The robot is at {requester}'s desk.", f"{requester}: has the locker code"),
           plan(f"{start_done} {item.capitalize()} collected and brought over.", f"Hand the {item} to {requester}"),
           decision(f"Wait for {requester} to take the {item}.", act("WaitInPlace", user=requester)),
           f"Y\n{requester} scanned the code and took the {item}.")
    f.step(perception("The delivery is complete.", f"{requester}: received the {item}"),
           plan(f"{steps_done}"),
           decision("Everything is done.", act("Stop", outcome="achieved")))


def b01(f):
    if f.config == "direct":
        f.add("decision", "\n".join([
            act("Inquire", contact="Wu", question="Hi Wu, could Lee borrow your pen?"),
            act("Move", target_name="Wu"), act("SendQRCode", contact="Wu"), act("WaitInPlace", user="Wu"),
            act("Inform", contact="Lee", content="Your pen from Wu is on its way."),
            act("Move", target_name="Lee"), act("SendQRCode", contact="Lee"), act("WaitInPlace", user="Lee"),
            act("Stop", outcome="achieved")]))
        return
    f.step(perception("Lee wants to borrow Wu's pen. Nothing has been done yet.",
                      "Wu: owns a pen, at Workstation 3, available\nLee: requester, at Workstation 1"),
           plan("none", "Ask Wu to lend the pen", "Collect the pen at Wu's desk", "Bring the pen to Lee"),
           decision("Start by asking Wu.",
                    act("Inquire", contact="Wu", question="Hi Wu, could Lee borrow your pen? I can pick it up now.")),
           "Y\nWu agreed to lend the pen.")
    pickup_and_return(f, "Wu", "Lee", "pen", "Wu agreed.", "Pen delivered to Lee.")


# --- b27: L1, tell Wang about the meeting ---------------------------------------------

def b27(f):
    if f.config == "direct":
        f.add("decision", "\n".join([
            act("Inform", contact="Wang", content="Hi Wang, the team meeting moved to 3 pm."),
            act("Stop", outcome="achieved")]))
        return
    f.step(perception("Lee asks to pass a message to Wang.", "Wang: recipient, at Workstation 5"),
           plan("none", "Tell Wang that the team meeting moved to 3 pm"),
           decision("A single message does it.",
                    act("Inform", contact="Wang", content="Hi Wang, the team meeting moved to 3 pm.")),
           "Y\nThe message reached Wang.")
    f.step(perception("Wang has been told.", "Wang: informed"),
           plan("Wang was told about the meeting."),
           decision("Nothing else is needed.", act("Stop", outcome="achieved")))


# --- b09-v1: L2, Mao is away so Wu prints ---------------------------------------------

def ask_mao(f):
    f.step(perception("Lee wants the report printed by Mao.",
                      "Mao: owns a printer, available per memory\nWu: owns a printer\nLee: requester"),
           plan("none", "Ask Mao to print Lee's report", "Collect the printout", "Bring the printout to Lee"),
           decision("Ask Mao first, as Lee requested.",
                    act("Inquire", contact="Mao", question="Hi Mao, could you print Lee's report for me?")),
           "N\nMao declined and is unavailable right now.\nUNAVAILABLE: Mao")


def print_with_wu(f, lead):
    f.step(perception("Mao is unavailable. Wu also owns a printer.",
                      "Mao: unavailable\nWu: owns a printer, available\nLee: holds the report file"),
           plan(lead, "Forward the report to Wu and ask Wu to print it", "Collect the printout at Wu's desk",
                "Bring the printout to Lee"),
           decision("Switch to Wu: forward the file and ask.",
                    act("Forward", source="Lee", target="Wu"),
                    act("Inquire", contact="Wu", question="Hi Wu, I forwarded Lee's report to you. Could you print it?")),
           "Y\nWu has the file and agreed to print it.")
    pickup_and_return(f, "Wu", "Lee", "printout", "Wu printed the report.", "Printout delivered to Lee.")


def b09_v1(f):
    if f.config == "direct":
        f.add("decision", "\n".join([
            act("Forward", source="Lee", target="Mao"),
            act("Inquire", contact="Mao", question="Hi Mao, could you print Lee's report?"),
            act("Move", target_name="Mao"), act("SendQRCode", contact="Mao"), act("WaitInPlace", user="Mao"),
            act("Inform", contact="Lee", content="Your printout is on its way."),
            act("Move", target_name="Lee"), act("SendQRCode", contact="Lee"), act("WaitInPlace", user="Lee"),
            act("Stop", outcome="achieved")]))
        return
    ask_mao(f)
    if f.config == "noplan":
        # Without a roadmap the decision module sees only the refusal.
        f.step(perception("Mao is unavailable.", "Mao: unavailable\nLee: requester"),
               None,
               decision("Mao cannot print, so the request cannot be carried out.",
                        act("Stop", outcome="unachievable")))
        return
    if f.config == "norefl":
        # Memory still lists Mao as available, so the refusal gets a second try.
        f.step(perception("Mao replied that they are unavailable.", "Mao: available per memory"),
               plan("Asked Mao.", "Ask Mao again", "Collect the printout", "Bring the printout to Lee"),
               decision("Memory says Mao is available; check again.",
                        act("Inquire", contact="Mao", question="Mao, are you sure you cannot print Lee's report?")))
    print_with_wu(f, "Asked Mao, who is unavailable.")


# --- b04-v5: L3 achievable, umbrella from an owner found through the group -------------

def b04_v5(f):
    if f.config == "direct":
        f.add("decision", "\n".join([
            act("Inquire", contact="Zhou", question="Hi Zhou, could Liu borrow your umbrella?"),
            act("Move", target_name="Zhou"), act("SendQRCode", contact="Zhou"), act("WaitInPlace", user="Zhou"),
            act("Inform", contact="Liu", content="Your umbrella is on its way."),
            act("Move", target_name="Liu"), act("SendQRCode", contact="Liu"), act("WaitInPlace", user="Liu"),
            act("Stop", outcome="achieved")]))
        return
    f.step(perception("Liu wants to borrow Zhou's umbrella.",
                      "Zhou: owns an umbrella\nSun: owns an umbrella\nLiu: requester, at Workstation 7"),
           plan("none", "Ask Zhou for the umbrella", "Collect it", "Bring it to Liu"),
           decision("Ask Zhou first.",
                    act("Inquire", contact="Zhou", question="Hi Zhou, could Liu borrow your umbrella?")),
           "N\nZhou is unavailable.\nUNAVAILABLE: Zhou")
    if f.config == "norefl":
        f.step(perception("Zhou replied that they are unavailable.", "Zhou: available per memory"),
               plan("Asked Zhou.", "Ask Zhou again", "Collect it", "Bring it to Liu"),
               decision("Memory says Zhou is available; try once more.",
                        act("Inquire", contact="Zhou", question="Zhou, could you lend the umbrella after all?")))
    f.step(perception("Zhou is unavailable. Sun also owns an umbrella.", "Sun: owns an umbrella, available per memory"),
           plan("Zhou is unavailable.", "Ask Sun for the umbrella", "Collect it", "Bring it to Liu"),
           decision("Try Sun.", act("Inquire", contact="Sun", question="Hi Sun, could Liu borrow your umbrella?")),
           "N\nSun is unavailable too.\nUNAVAILABLE: Sun")
    if f.config == "noplan":
        f.step(perception("Zhou and Sun are both unavailable.", "Zhou: unavailable\nSun: unavailable"),
               None,
               decision("Nobody in memory can lend an umbrella.", act("Stop", outcome="unachievable")))
        return
    if f.config == "noperc":
        # Without a perception summary the earlier refusal is overlooked once.
        f.step(None,
               plan("Sun is unavailable.", "Ask Zhou for the umbrella", "Collect it", "Bring it to Liu"),
               decision("Check with Zhou.",
                        act("Inquire", contact="Zhou", question="Hi Zhou, is your umbrella free now?")),
               "N\nZhou is still unavailable.\nUNAVAILABLE: Zhou")
    f.step(perception("No known umbrella owner is available.", "Office Group: every colleague"),
           plan("Zhou and Sun are unavailable.", "Ask the Office Group who has an umbrella", "Collect it",
                "Bring it to Liu"),
           decision("Ask the group.",
                    act("Inquire", contact="Office Group",
                        question="Hi all, does anyone have an umbrella Liu could borrow?")),
           "Y\nZhu replied in the group with an umbrella to lend.")
    f.step(perception("Zhu offered an umbrella in the group chat.", "Zhu: has an umbrella, at Workstation 15",
                      "Office Group: Zhu offered an umbrella"),
           plan("Zhu offered an umbrella.", "Confirm with Zhu and go there", "Collect it", "Bring it to Liu"),
           decision("Confirm with Zhu, then go.",
                    act("Inform", contact="Zhu", content="Thanks Zhu! I'm coming to your desk for the umbrella."),
                    act("Move", target_name="Zhu"), act("SendQRCode", contact="Zhu")),
           "Y\nThe robot is at Zhu's desk and the code was sent.")
    f.step(perception("The robot is at Zhu's desk.", "Zhu: has the locker code"),
           plan("At Zhu's desk.", "Wait for Zhu to load the umbrella", "Bring it to Liu"),
           decision("Wait for Zhu.", act("WaitInPlace", user="Zhu")),
           "Y\nZhu put the umbrella in the locker.")
    f.step(perception("The umbrella is in the locker.", "Liu: waiting"),
           plan("Umbrella collected.", "Tell Liu and deliver the umbrella"),
           decision("Head to Liu.",
                    act("Inform", contact="Liu", content="I have an umbrella for you from Zhu. On my way."),
                    act("Move", target_name="Liu"), act("SendQRCode", contact="Liu")),
           "Y\nThe robot reached Liu and sent the code.")
    f.step(perception("The robot is at Liu's desk.", "Liu: has the locker code"),
           plan("Umbrella brought to Liu.", "Hand the umbrella over"),
           decision("Wait for Liu.", act("WaitInPlace", user="Liu")),
           "Y\nLiu took the umbrella.")
    f.step(perception("Liu has the umbrella.", "Liu: done"),
           plan("Umbrella delivered to Liu."),
           decision("Done.", act("Stop", outcome="achieved")))


# --- b09-v6: L3 unachievable, no printer owner is around ----------------------------

def b09_v6(f):
    if f.config == "direct":
        b09_v1(f)
        return
    ask_mao(f)
    if f.config == "norefl":
        f.step(perception("Mao replied that they are unavailable.", "Mao: available per memory"),
               plan("Asked Mao.", "Ask Mao again", "Collect the printout", "Bring the printout to Lee"),
               decision("Memory says Mao is available; check again.",
                        act("Inquire", contact="Mao", question="Mao, are you sure you cannot print Lee's report?")))
    f.step(perception("Mao is unavailable. Wu also owns a printer.", "Wu: owns a printer, available per memory"),
           plan("Mao is unavailable.", "Ask Wu to print the report", "Collect the printout", "Bring it to Lee"),
           decision("Try Wu.", act("Inquire", contact="Wu", question="Hi Wu, could you print Lee's report?")),
           "N\nWu is unavailable as well.\nUNAVAILABLE: Wu")
    if f.config == "noplan":
        f.step(perception("Mao and Wu are unavailable.", "Mao: unavailable\nWu: unavailable"),
               None,
               decision("No known printer owner is available.", act("Stop", outcome="unachievable")))
        return
    f.step(perception("Mao and Wu are unavailable.", "Office Group: every colleague"),
           plan("Mao and Wu are unavailable.", "Ask the Office Group for anyone with a printer",
                "Stop if nobody can help"),
           decision("Ask the group.",
                    act("Inquire", contact="Office Group",
                        question="Hi all, does anyone have a printer who could print Lee's report?")),
           "N\nNobody in the group answered.")
    f.step(perception("No printer owner is available and the group is silent.", "none"),
           plan("Mao, Wu and the group could not help."),
           decision("The report cannot be printed now.", act("Stop", outcome="unachievable")))


BUILDERS = {"b01": b01, "b27": b27, "b09-v1": b09_v1, "b04-v5": b04_v5, "b09-v6": b09_v6}


def main():
    root = pathlib.Path(__file__).resolve().parent.parent
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=pathlib.Path, default=root / "data" / "fixtures" / "suite")
    args = parser.parse_args()
    for config in CONFIGS:
        for entry in ENTRIES:
            f = Fixture(config)
            BUILDERS[entry](f)
            path = args.out / config / f"{entry}.jsonl"
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("w") as out:
                out.write(f"# {entry}, configuration {config}. Generated by tools/make_fixtures.py.\n")
                for r in f.records:
                    out.write(json.dumps(r, sort_keys=True) + "\n")
    print(f"wrote {len(CONFIGS) * len(ENTRIES)} fixture files under {args.out}")


if __name__ == "__main__":
    main()
