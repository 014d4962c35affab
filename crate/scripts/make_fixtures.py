#!/usr/bin/env python3
"""Regenerates the synthetic fixtures under fixtures/. Output is deterministic."""

import csv
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"

COMMENT_THEMES = {
    "safety": (
        ["the vaccine", "the shot", "this injection", "the covid jab"],
        ["causes blood clots", "harms young hearts", "has hidden side effects",
         "is dangerous for kids", "injures healthy children", "triggers heart inflammation"],
    ),
    "freedom": (
        ["parents", "families", "every citizen", "we the people"],
        ["should choose for their own kids", "deserve bodily autonomy", "reject forced medicine",
         "must keep medical freedom", "will not accept government mandates", "refuse coercion by schools"],
    ),
    "efficacy": (
        ["the data", "the trial evidence", "the efficacy data", "the science"],
        ["does not show the vaccine works", "fails to prove any benefit", "shows infections continue anyway",
         "was never published in full", "shows protection fades within months", "cannot support approval"],
    ),
    "risk": (
        ["young children", "most kids", "healthy toddlers", "school students"],
        ["recover quickly from covid", "rarely get seriously ill", "face almost no covid danger",
         "have strong natural immunity", "shake off the virus like a cold", "are not hospitalized for covid"],
    ),
    "process": (
        ["the approval", "the agency", "the review panel", "the emergency authorization"],
        ["was rushed without proper study", "ignored dissenting experts", "skipped long term trials",
         "answers to drug companies", "hid adverse event reports", "broke normal protocol"],
    ),
    "support": (
        ["this vaccine", "the pediatric dose", "approval for kids", "the new shot"],
        ["protects vulnerable children", "keeps classrooms open", "saves grandparents lives",
         "lets families travel safely", "reduces hospital crowding", "helps end the pandemic"],
    ),
}

CONNECTIVES = ["and", "because", "but"]


def clause(rng, theme):
    subjects, predicates = COMMENT_THEMES[theme]
    return f"{rng.choice(subjects)} {rng.choice(predicates)}"


def sentence(text):
    return text[0].upper() + text[1:] + "."


def comments(rng, n=120):
    themes = sorted(COMMENT_THEMES)
    out = []
    for i in range(n):
        a, b = rng.sample(themes, 2)
        parts = [sentence(f"{clause(rng, a)} {rng.choice(CONNECTIVES)} {clause(rng, b)}")]
        if rng.random() < 0.4:
            parts.append(sentence(clause(rng, rng.choice([a, b]))))
        out.append({"id": f"fda{i:03d}", "text": " ".join(parts), "source": "fda_comment", "meta": {}})
    return out


STS_PAIRS = [
    ("A man is playing a guitar.", "A man plays the guitar.", 4.8),
    ("A woman is slicing an onion.", "A woman cuts an onion into pieces.", 4.4),
    ("The cat sleeps on the sofa.", "A cat is sleeping on a couch.", 4.2),
    ("Two dogs run across the field.", "Dogs are running in a field.", 4.0),
    ("A child is riding a bike.", "A kid rides a bicycle down the street.", 3.8),
    ("The stock market fell sharply today.", "Shares dropped a lot on the market today.", 3.9),
    ("The senator voted against the tax bill.", "The tax bill was opposed by the senator.", 4.5),
    ("A chef is cooking pasta.", "Someone is preparing noodles in a kitchen.", 3.2),
    ("The train arrived late and passengers were angry.", "Passengers were upset because the train was late.", 3.6),
    ("It will rain tomorrow.", "Tomorrow the weather will be wet.", 3.4),
    ("A boy kicks a ball.", "A girl reads a book.", 0.6),
    ("The president gave a speech.", "A dog barks at the mailman.", 0.1),
    ("The vaccine is safe and effective.", "The vaccine works and causes little harm.", 3.7),
    ("The vaccine is dangerous.", "The vaccine is safe.", 1.5),
    ("A plane takes off from the runway.", "An airplane is departing.", 4.1),
    ("The children are swimming in the lake.", "Kids swim in a lake.", 4.6),
    ("He bought a new car but it broke.", "His new car stopped working.", 3.1),
    ("The court ruled the law unconstitutional.", "Judges struck down the law.", 3.5),
    ("A woman is playing the piano.", "A man is playing the flute.", 1.2),
    ("The city raised bus fares.", "Bus tickets now cost more in the city.", 4.0),
    ("Prices rose because demand increased.", "Higher demand pushed prices up.", 4.3),
    ("The band played until midnight.", "A storm knocked out power.", 0.3),
    ("She is writing a letter.", "A woman writes a note.", 3.9),
    ("The team lost the final game.", "The team won the championship.", 1.4),
]

PC_PAIRS = [
    ("Congress passed the budget today", "The budget was approved by Congress today", 1),
    ("Great win for the home team tonight", "Home team takes the victory tonight", 1),
    ("New phone release delayed again", "The phone launch has been pushed back once more", 1),
    ("Storm warning issued for the coast", "Coastal areas under a storm warning", 1),
    ("The senator resigned this morning", "The senator stepped down this morning", 1),
    ("Vaccines are now available for kids", "Children can now get vaccinated", 1),
    ("Traffic is terrible downtown", "Downtown roads are jammed", 1),
    ("Schools will reopen next week", "Classes resume next week", 1),
    ("The movie was amazing and funny", "That film was hilarious and great", 1),
    ("Gas prices hit a record high", "Fuel costs reach an all time high", 1),
    ("The museum is closed today", "I love pizza with extra cheese", 0),
    ("Election results come in tonight", "My cat learned a new trick", 0),
    ("The concert sold out quickly", "The concert was cancelled", 0),
    ("Taxes will go up next year", "Taxes will be cut next year", 0),
    ("The bridge reopened after repairs", "A new bakery opened on main street", 0),
    ("Rain expected all weekend", "Sunny skies all weekend", 0),
    ("The governor signed the bill", "The governor vetoed the bill", 0),
    ("Our team hired a new coach", "The stadium needs new seats", 0),
    ("The airport added new flights", "Flights were grounded by fog", 0),
    ("Scientists found water on the moon", "The library extended its hours", 0),
]

TWEET_TOPICS = {
    "immigration": {
        "D": ["immigrants strengthen our communities", "dreamers deserve a path to citizenship",
              "family separation at the border is cruel", "refugees deserve our protection"],
        "R": ["we must secure the border now", "illegal immigration threatens our jobs",
              "the border wall keeps families safe", "sanctuary cities ignore the law"],
    },
    "guns": {
        "D": ["universal background checks save lives", "we need to ban assault weapons",
              "gun violence is a public health crisis", "our kids deserve safe schools from shootings"],
        "R": ["the second amendment protects our freedom", "law abiding gun owners deserve respect",
              "gun control punishes responsible citizens", "hunters and sportsmen defend our rights"],
    },
    "healthcare": {
        "D": ["health care is a human right", "we must protect coverage for preexisting conditions",
              "medicare for all would lower costs", "the affordable care act saves lives"],
        "R": ["obamacare raised premiums for families", "patients should choose their own doctors",
              "government run health care fails patients", "we must repeal the health care mandate"],
    },
    "climate": {
        "D": ["climate change is an urgent threat", "clean energy creates good jobs",
              "we must rejoin the paris climate agreement", "polluters must pay for carbon emissions"],
        "R": ["energy independence means american oil", "coal miners deserve our support",
              "climate regulations kill manufacturing jobs", "the epa overreaches on energy rules"],
    },
    "taxes": {
        "D": ["the wealthy must pay their fair share", "tax cuts for billionaires hurt workers",
              "we should expand the child tax credit", "corporations exploit tax loopholes"],
        "R": ["tax cuts grow the economy", "families keep more of their paychecks",
              "lower taxes help small businesses hire", "washington spends too much money"],
    },
    "veterans": {
        "D": ["veterans deserve timely care at the va", "we must honor our veterans with benefits",
              "no veteran should be homeless", "military families deserve our support"],
        "R": ["veterans deserve timely care at the va", "we must honor our veterans with benefits",
              "no veteran should be homeless", "military families deserve our support"],
    },
}

TAGS = {"immigration": "#immigration", "guns": "#guns", "healthcare": "#healthcare",
        "climate": "#climate", "taxes": "#taxes", "veterans": "#veterans"}


def legislators(rng, n=12):
    states = ["CA", "TX", "NY", "FL", "OH", "PA", "MI", "GA", "NC", "AZ", "WA", "TN"]
    out = []
    for i in range(n):
        out.append({"legislator_id": f"L{i:02d}", "party": "D" if i % 2 == 0 else "R", "state": states[i % len(states)]})
    return out


def tweets(rng, legs):
    out = []
    topics = sorted(TWEET_TOPICS)
    for leg in legs:
        loyalty = rng.uniform(0.65, 0.95)
        other = "R" if leg["party"] == "D" else "D"
        chosen = rng.sample(topics, 4)
        n = 0
        for topic in chosen:
            for _ in range(4):
                side = leg["party"] if rng.random() < loyalty else other
                a, b = rng.sample(TWEET_TOPICS[topic][side], 2)
                text = f"{sentence(a + ' ' + rng.choice(CONNECTIVES) + ' ' + b)} {TAGS[topic]}"
                out.append({"id": f"{leg['legislator_id']}-t{n:02d}", "text": text, "source": "tweet",
                            "meta": {"legislator_id": leg["legislator_id"]}})
                n += 1
        leg["loyalty"] = loyalty
    return out


def votes(rng, legs, n_votes=80):
    rows = []
    for v in range(n_votes):
        d_pos = rng.choice(["Yea", "Nay"])
        for leg in legs:
            if rng.random() < 0.05:
                pos = "Not Voting"
            else:
                party_pos = d_pos if leg["party"] == "D" else ("Nay" if d_pos == "Yea" else "Yea")
                keep = rng.random() < leg["loyalty"]
                pos = party_pos if keep else ("Nay" if party_pos == "Yea" else "Yea")
            rows.append({"legislator_id": leg["legislator_id"], "vote_id": f"rc{v:03d}", "position": pos})
    return rows


def templates():
    return {
        "sts_template.json": {
            "template_id": "sts-paraphrase",
            "instruction": "Paraphrase the following text.",
            "exemplar_format": "Text: <input>\nParaphrase: <output>",
            "separator": "###",
        },
        "fda_template.json": {
            "template_id": "fda-propositions",
            "instruction": (
                "Human utterances contain propositions that may or may not be explicit in the literal "
                "meaning of the utterance. Given an utterance, state the propositions of that utterance in "
                "a brief list. All generated propositions should be short, independent, and written in "
                "direct speech and simple sentences. A proposition consists of a subject, a verb, and an "
                "object.\nThese utterances come from a dataset of public comments on the FDA website "
                "concerning the covid vaccine."
            ),
            "exemplar_format": "Utterance: <input>\nPropositions: <output>",
            "separator": "===",
        },
        "leg_template.json": {
            "template_id": "legislative-claims",
            "instruction": "List the claims or beliefs implied by the tweet.",
            "exemplar_format": "Text: <input>\nBrief Claims: <output>",
            "separator": "===",
        },
    }


FDA_EXEMPLARS = [
    ("Stop illegally forcing the clot shot onto the citizens and their children. This is wrong and you are taking away our freedom. The Covid vaccine is killing people.",
     ["The covid vaccine causes blood clots.", "The covid vaccine is being forced on people illegally.", "Forcing the covid vaccine limits freedom."]),
    ("Kids don t get the fake coved flu and then vaccines don t work if you can still gat it. Refer to Colin Powell",
     ["Covid is not real.", "Covid vaccines do not prevent covid."]),
    ("Bodily autonomy is everyone s right and extremely important. everyone should have the right to choose whether or not they want to have a vaccine. It should not be mandated for any profession or for children at any level of education as it violates their rights.,",
     ["Vaccine mandates violate bodily autonomy.", "Vaccine mandates violates the rights of citizens.", "People should choose whether they get vaccinated."]),
    ("God given freedom over our bodies and mandates aren t laws. Morally wrong.,",
     ["God grants people freedom over their bodies.", "Mandates are not laws.", "Vaccine mandates are morally wrong."]),
    ("Do not force children to take a dangerous vaccine for a sickness that is nearly nonexistent in that age range and is easily treatable with other medications.,",
     ["Covid is nearly nonexistent in children.", "Covid is treatable with other medications.", "The covid vaccine is dangerous."]),
    ("Please do not use our children in this massive experiment. Please. Children recover from COVID 19. There is no need for them to be vaccinated against a virus that they will recover from. It doesn t make sense. Please do not use our children in this experiment.,",
     ["Covid vaccination is an experiment.", "Children do not require covid vaccines.", "Covid is not serious is children."]),
    ("WE DO NOT CONSENT with the emergency authorization of the Covid vaccine for children 5 11.,",
     ["The emergency authorization of the vaccine for children is invalid."]),
    ("NOT to mandate vaccine for children 5 12 as there is no scientific data to prove the vaccines work,",
     ["Scientific data does not support vaccine efficacy."]),
    ("Please, I beg of you to not pass any mandates that call for children to be vaccinated. It s bad enough that healthy adults who take care of their bodies are being coerced or forced to comply. Our children matter!,",
     ["The government is forcing adults to take the vaccine.", "Children should not be mandated to take the vaccine."]),
    ("Please do not offer vaccinations for kids 5 11. They have beautiful immune systems to keep them healthy and fight off viruses and bacteria.,",
     ["Children have strong immune systems.", "Children are not susceptible to complications from covid."]),
    ("Our children need to be protected from experimental vaccines. The proper protocol has not been followed and our children should not be guinea pigs and put it risk. See the Nuremberg trials, you will be held accountable.,",
     ["The covid vaccine is experimental.", "The proper protocol to approve vaccines was not followed.", "Those mandating the vaccine will be held accountable.", "The use of covid vaccines in children is criminal."]),
    ("It appears to me that there is a lack of fidelity in this entire VACCINE process, deemed scientific . There are SO many inconsistencies from the onset of how this vaccine was going to stop covid. From my stand point, half of those I know now have health issues after their shot s are unable to function in their daily routines. I know health professionals, that when asked if they were submitting VAERS info, the reply is We simply do not have the time or Have you ever tried to input Vaers info? It s IMPOSSIBLE!!",
     ["The covid vaccine causes health problems.", "Doctors don't report adverse effects of vaccines.", "Doctors are prevented from reporting adverse effects of vaccines.", "The covid vaccine approval process is unscientific."]),
    ("Do not authorize this injection for children. 0.0007 fatality across all kids in America under 18 is no ground for authorizing.",
     ["Child fatality rate is too low to mandate a covid vaccine."]),
]

LEG_EXEMPLARS = [
    ("My thoughts and prayers go out to the family of former Riverside County Sheriff Larry Smith who passed away late Friday",
     ["Police should be respected"]),
    ("Encourage all of #TN 2 vote in local spring elections & honor the brave men&women who have died so we can be free.",
     ["The military should be revered", "People should vote", "The military protects democracy", "The military protects freedom"]),
    (".@FreedomHouseDC reports tht #China continues crackdown on media, religious groups + civil society #FreedomReport",
     ["China is authoritarian", "China does not support freedom of religion", "The Chinese government does not protect freedom of expression", "Press freedom is limited in China"]),
    ("Glad the 9th Circuit Court of Appeals banned #DADT- Finally, DADT is over. 13,000 have been discharged under DADT. No more. #equalityforall",
     ["'Don't ask, don't tell' is a bad policy", "Gay people should be able to serve openly in the military", "Homosexual people deserve equal rights."]),
    ("Enjoyed lunch with our remarkable Fall 2017 DC interns. Thank you so much for all of your great work!",
     ["Public service is valuable"]),
    ("Congrats to #Knoxville native Trevor Bayne on becoming the youngest ever winner of the #Daytona500! #NASCAR #VictoryLane",
     ["NASCAR has cultural significance"]),
    ("Tomorrow, #SubCMT will discuss how the sharing economy creates jobs, benefits consumers,  raises policy questions:",
     ["The sharing economy has economic benefits", "Resources should be shared"]),
    ("Don't forget to RSVP for our Day of Service in #LynnMA this Sunday using this link →  #MA6 #ServiceNation &",
     ["Service and charity are important"]),
    ("Spoke today @CatoInstitute on importance of #immigration for U.S. prosperity, to watch click",
     ["Immigration strengthens the economy", "Immigration benefits the United States"]),
    ("Earlier this week, I met with the owner of @uponadiamond, Steve Brown, to discuss ways this Congress can help our nation’s entrepreneurs. Thanks for stopping by my D.C. office!",
     ["The United States government should support business", "Entrepreneurs deserve public support"]),
    ("Exercise your right to vote this Election Day! For #SMCounty constituents, polling info here:",
     ["People should vote", "Voting is a right"]),
    ("60 years ago, #RosaParks was arrested for not giving up her bus seat. Her brave act continues to inspire all who fight for #CivilRights.",
     ["Civil rights must be defended", "Rosa Parks is a hero", "People should be inspired by Rosa Parks", "Racial segregation is wrong"]),
    ("Community Colleges like @lavalleycollege are great/affordable places for students to earn the credits for 4 yr degrees #FreeCommunityCollege",
     ["Community college is affordable", "Education is important", "Community college should be free"]),
    ("Trump’s EO guts climate policies  clean energy jobs to boost the profits of corporate polluters #ClimateInactionEO",
     ["President Trump is bad for the environment", "Corporations are polluters", "Renewable energy creates jobs", "President Trump supports corporations", "President Trump believes that corporate profits are more important than the environment"]),
    ("From using the words ‘invasion’  ‘infestation’ to describe immigrants to mocking Asians for their accents, @realDonaldTrump’s racism knows no bounds. Trump’s behavior is beneath the dignity of the office he holds and I wholly condemn his racist remarks.",
     ["President Trump is racist", "President Trump dehumanizes immigrants", "Immigrants deserve respect", "Public leaders should set prosocial examples"]),
    ("If you’re currently near Fort Rucker, please heed warnings from law enforcement. My prayers are with all involved as we await further details.",
     ["People should obey police", "Prayer is meaningful"]),
]


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def write_csv(path, rows, fields):
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in fields})


def main():
    rng = random.Random(20231016)
    write_jsonl(ROOT / "comments.jsonl", comments(rng))

    (ROOT / "sts").mkdir(parents=True, exist_ok=True)
    with open(ROOT / "sts" / "sts_fixture.tsv", "w", encoding="utf-8") as f:
        f.write("text_a\ttext_b\tscore\n")
        for a, b, s in STS_PAIRS:
            f.write(f"{a}\t{b}\t{s}\n")
    write_jsonl(ROOT / "sts" / "pc_fixture.jsonl",
                [{"text_a": a, "text_b": b, "label": l} for a, b, l in PC_PAIRS])

    legs = legislators(rng)
    write_jsonl(ROOT / "tweets.jsonl", tweets(rng, legs))
    write_csv(ROOT / "legislators.csv", legs, ["legislator_id", "party", "state"])
    write_csv(ROOT / "votes.csv", votes(rng, legs), ["legislator_id", "vote_id", "position"])
    with open(ROOT / "topic_labels.json", "w", encoding="utf-8") as f:
        json.dump({str(k): f"topic {k}" for k in range(6)}, f, indent=2)
        f.write("\n")

    prompts = ROOT / "prompts"
    prompts.mkdir(parents=True, exist_ok=True)
    for name, tpl in templates().items():
        with open(prompts / name, "w", encoding="utf-8") as f:
            json.dump(tpl, f, indent=2, ensure_ascii=False)
            f.write("\n")
    for name, rows, prefix in [("fda_exemplars.json", FDA_EXEMPLARS, "fda"), ("leg_exemplars.json", LEG_EXEMPLARS, "leg")]:
        data = [{"id": f"{prefix}-{i:02d}", "input": inp, "outputs": outs} for i, (inp, outs) in enumerate(rows)]
        with open(prompts / name, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
            f.write("\n")


if __name__ == "__main__":
    main()
