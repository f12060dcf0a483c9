"""Regenerate the bundled 20-sentence toy corpus (src/dhg_tbsa/data/toy.tsv).

Each token is ``surface/head/deprel/tag`` with tag ``O`` or ``B-POL`` / ``I-POL``.
Heads are hand-assigned, roughly UD style.
"""
from pathlib import Path

SENTENCES = [
    ("but-service-food",
     "Great/2/amod/O service/0/root/B-POS but/5/cc/O dreadful/5/amod/O food/2/conj/B-NEG !/2/punct/O"),
    ("but-pizza-waiter",
     "The/2/det/O pizza/4/nsubj/B-POS was/4/cop/O delicious/0/root/O but/9/cc/O the/7/det/O "
     "waiter/9/nsubj/B-NEG was/9/cop/O rude/4/conj/O ./4/punct/O"),
    ("macos",
     "I/2/nsubj/O like/0/root/O coming/2/xcomp/O back/3/advmod/O to/7/case/O Mac/7/compound/B-POS "
     "OS/3/obl/I-POS but/12/cc/O this/10/det/O laptop/12/nsubj/O is/12/aux/O lacking/2/conj/O "
     "in/15/case/O speaker/15/compound/B-NEG quality/12/obl/I-NEG compared/12/advcl/O to/22/case/O "
     "my/22/nmod:poss/O $400/22/amod/O old/22/amod/O HP/22/compound/O laptop/16/obl/O ./2/punct/O"),
    ("noop-tech",
     "I/3/nsubj/O haven't/3/aux/O used/0/root/O it/3/obj/O for/6/case/O anything/3/obl/O "
     "high/8/amod/O tech/6/nmod/O yet/3/advmod/O ,/13/punct/O but/13/cc/O I/13/nsubj/O "
     "love/3/conj/O it/13/obj/O already/13/advmod/O ./3/punct/O"),
    ("battery",
     "The/3/det/O battery/3/compound/B-POS life/5/nsubj/I-POS is/5/cop/O excellent/0/root/O ./5/punct/O"),
    ("screen",
     "The/2/det/O screen/5/nsubj/B-NEG is/5/cop/O too/5/advmod/O dim/0/root/O ./5/punct/O"),
    ("but-staff-prices",
     "The/2/det/O staff/4/nsubj/B-POS were/4/cop/O friendly/0/root/O but/10/cc/O the/7/det/O "
     "prices/10/nsubj/B-NEG are/10/cop/O too/10/advmod/O high/4/conj/O ./4/punct/O"),
    ("noop-yesterday",
     "I/2/nsubj/O went/0/root/O there/2/advmod/O yesterday/2/obl:tmod/O with/6/case/O "
     "friends/2/obl/O ./2/punct/O"),
    ("but-sushi-delivery",
     "Fresh/2/amod/O sushi/0/root/B-POS but/5/cc/O slow/5/amod/O delivery/2/conj/B-NEG ./2/punct/O"),
    ("but-drive-fan",
     "The/3/det/O hard/3/amod/B-POS drive/5/nsubj/I-POS is/5/cop/O fast/0/root/O but/10/cc/O "
     "the/8/det/O fan/10/nsubj/B-NEG is/10/cop/O noisy/5/conj/O ./5/punct/O"),
    ("noop-nextweek",
     "We/3/nsubj/O will/3/aux/O see/0/root/O what/5/nsubj/O happens/3/ccomp/O next/7/amod/O "
     "week/5/obl:tmod/O ./3/punct/O"),
    ("noop-tuesday",
     "It/2/nsubj/O arrived/0/root/O on/4/case/O Tuesday/2/obl/O ./2/punct/O"),
    ("noop-brother",
     "My/2/nmod:poss/O brother/3/nsubj/O bought/0/root/O one/3/obj/O last/6/amod/O "
     "year/3/obl:tmod/O ./3/punct/O"),
    ("desserts",
     "The/2/det/O desserts/4/nsubj/B-POS were/4/cop/O amazing/0/root/O ./4/punct/O"),
    ("chicken",
     "We/2/nsubj/O ordered/0/root/O the/4/det/O chicken/2/obj/B-NEU for/6/case/O lunch/2/obl/O "
     "./2/punct/O"),
    ("winelist-decor",
     "The/3/det/O wine/3/compound/B-NEU list/5/nsubj/I-NEU is/5/cop/O long/0/root/O and/10/cc/O "
     "the/8/det/O decor/10/nsubj/B-POS is/10/cop/O lovely/5/conj/O ./5/punct/O"),
    ("but-price-portions",
     "The/2/det/O price/4/nsubj/B-POS was/4/cop/O reasonable/0/root/O but/9/cc/O the/7/det/O "
     "portions/9/nsubj/B-NEG were/9/cop/O tiny/4/conj/O ./4/punct/O"),
    ("service-slow",
     "The/2/det/O service/4/nsubj/B-NEG was/4/cop/O slow/0/root/O ./4/punct/O"),
    ("windows",
     "The/2/det/O laptop/3/nsubj/O came/0/root/O with/5/case/O Windows/3/obl/B-NEU "
     "installed/5/acl/O ./3/punct/O"),
    ("but-keyboard-touchpad",
     "The/2/det/O keyboard/4/nsubj/B-POS is/4/cop/O solid/0/root/O but/9/cc/O the/7/det/O "
     "touchpad/9/nsubj/B-NEG is/9/cop/O terrible/4/conj/O ./4/punct/O"),
]


def render() -> str:
    out = []
    for sid, spec in SENTENCES:
        out.append(f"# id = {sid}")
        for i, item in enumerate(spec.split(), start=1):
            surface, head, deprel, tag = item.rsplit("/", 3)
            aspect, _, pol = tag.partition("-")
            out.append("\t".join([str(i), surface, head, deprel, aspect, pol or "NONE"]))
        out.append("")
    return "\n".join(out)


if __name__ == "__main__":
    target = Path(__file__).resolve().parents[1] / "src" / "dhg_tbsa" / "data" / "toy.tsv"
    target.write_text(render(), encoding="utf-8")
    print(f"wrote {len(SENTENCES)} sentences to {target}")
