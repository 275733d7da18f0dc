import logging

import casemark as cm
from casemark.experiment import build_report, format_report
from casemark.language import display, render, Order

import pandas as pd


def main():
    """Main program"""
    logging.basicConfig(level=logging.INFO)

    """
    The Language
    """
    language = cm.PRESETS["dominant-obj"]
    inv = cm.Inventory(n_amb=4, n_unamb=4, n_actions=3)
    space = cm.build_meaning_space(inv, language.condition)
    print(f"language: {language}")
    print(f"{len(space)} meanings, e.g. {space[0]}")

    m = space[5]
    for order in (Order.SOV, Order.OSV):
        for marked in (False, True):
            u = render(m, order, marked, language.condition, inv)
            print(f"{order.value} marked={marked}: {display(u, inv)}")

    print(f"parsed: {cm.parse(u, m, language, inv)}")
    print(f"ambiguity: {cm.classify_ambiguity(m, language.condition, inv)}")

    """
    One Agent Learning the Language
    """
    rng = cm.nn.make_rng(0)
    train, test = cm.split_dataset(space, rng)
    corpus = cm.generate_corpus(train, language, rng, inv)

    agent = cm.Agent(inv, cm.AgentConfig(), cm.nn.make_rng(1))
    curve = cm.train_supervised(agent, corpus, cm.SlConfig(epochs=40))
    print(f"\nlosses after {len(curve)} epochs: {curve[-1]}")
    print(f"listening accuracy: {cm.listening_accuracy(agent, corpus):.2f}")

    record = cm.speak(agent, test[0], cm.DecodeMode.GREEDY)
    print(f"{test[0]} -> {display(record.utterance, inv)}")
    print(f"understood as {cm.predict_meaning(cm.listen(agent, record.utterance))}")

    """
    A Small Experiment
    """
    cfg = cm.default_config(
        n_pairs=4,
        jobs=2,
        out_dir="runs/tutorial",
        inventory=dict(inv),
        sl={"epochs": 40},
        rl={"inter_turns": 40, "meanings_per_turn": 64},
    )
    manifest = cm.run_experiment(cfg)
    print(f"\n{manifest.n_pairs - manifest.n_failed} pair(s) completed")

    rows = pd.read_csv("runs/tutorial/eval.csv")
    print(format_report(build_report(rows)))


if __name__ == "__main__":
    main()
