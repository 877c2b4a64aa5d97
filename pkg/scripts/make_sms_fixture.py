#!/usr/bin/env python3
"""Generate the bundled SMS-spam-style fixture.

Writes ``label<TAB>message`` rows (labels ``ham``/``spam``), the same layout
as the public SMS Spam Collection, so the loader and pipeline can run
without downloading anything.  Messages are synthetic: templated phrases
with randomised slots, casing, abbreviations and typos, plus ham messages
that borrow spam vocabulary (and vice versa) and 2% flipped labels so
the task is not trivial.

    python scripts/make_sms_fixture.py src/ncdkit/data/sms_spam_fixture.tsv
"""

import random
import sys

N_HAM = 620
N_SPAM = 380
SEED = 20240611
LABEL_NOISE = 0.02

NAMES = ["Tom", "Sara", "mum", "dad", "Jen", "Raj", "Kate", "Ben", "Ali", "Lucy", "babe", "hun", "bro", "Mike"]
PLACES = ["the pub", "uni", "work", "the station", "home", "town", "the gym", "Tesco", "the cinema",
          "the library", "church", "the park", "ur place", "my mum's"]
TIMES = ["5", "6ish", "7.30", "half 8", "tonight", "tmrw", "later", "after lunch", "in 10 mins",
         "around 4", "at noon", "this eve", "sat morning", "sun"]
FOODS = ["pizza", "curry", "chips", "dinner", "lunch", "a kebab", "tea", "brekkie", "sushi"]
THINGS = ["keys", "phone charger", "notes", "jacket", "umbrella", "wallet", "book", "ticket"]
FEEL = ["tired", "so bored", "knackered", "fine", "ok", "shattered", "gr8", "ill", "stressed"]

HAM = [
    "Hey {name}, r u coming to {place} {time}?",
    "Ok lar... see you at {place} {time}",
    "I'm at {place} now, where are you?",
    "Can you pick up {food} on the way home pls",
    "Sorry, I'll call later. In a meeting",
    "Did you see my {thing}? Think I left it at {place}",
    "lol that's so funny. {name} said the same thing",
    "Going to {place} {time}, wanna come?",
    "Just got home, feeling {feel}. Talk tmrw x",
    "Don't forget {food} {time}! {name} is coming too",
    "Happy birthday {name}!! Hope u have a great day :)",
    "I'll be there {time}, save me a seat",
    "What time does {place} close? Need to get my {thing}",
    "Haha no way. Tell {name} I said hi",
    "Can't talk now, call me {time} ok?",
    "u free {time}? fancy {food}?",
    "Thanks for {food} yesterday, was lovely",
    "My phone is dying, text {name} if u need me",
    "Running late, be at {place} {time}. Sorry!!",
    "Got the {thing}, cheers {name}",
    "Are we still on for {time}? {name} might be late",
    "I'm {feel} today, gonna stay in and watch tv",
    "Mum says {food} is ready, come down",
    "Did u win the match? {name} told me it was close",
    "Call me when you get this, nothing urgent",
    "Can u send me the notes from {place}? Missed the lecture",
    "I won't be at {place} {time}, something came up",
    "Free {time}? Need help moving my stuff",
    "Just won a tenner on the scratch card lol, {food} on me",
    "Text me the address of {place} pls",
]

PRIZES = ["£1000 cash", "£2000 prize", "a FREE holiday", "a Nokia phone", "£500 of vouchers",
          "a brand new iPhone", "£250 cash", "2 FREE cinema tickets", "an mp3 player", "£5000"]
CODES = ["WIN", "CLAIM", "GO", "PRIZE", "YES", "STOP", "FREE", "CASH", "JOIN", "TXT"]
TAILS = ["T&Cs apply", "18+ only", "150p/msg", "£1.50/wk", "cost 10p/min", "Opt out: reply STOP",
         "SAE to PO Box 123", "valid 12hrs only", "std rates apply", "Box97N7QP"]

SPAM = [
    "URGENT! You have won {prize}. Call {phone} now to claim. {tail}",
    "Congratulations! You've been selected to receive {prize}. Txt {code} to {short}",
    "FREE entry into our weekly draw to win {prize}! Text {code} to {short}. {tail}",
    "WINNER!! As a valued customer you have been awarded {prize}. Call {phone}. {tail}",
    "Your mobile number has won {prize} in our draw! To claim call {phone}",
    "You have 1 new voicemail. Please call {phone} now. {tail}",
    "Txt {code} to {short} for your chance to win {prize}! {tail}",
    "Final notice: your account is due for a reward of {prize}. Reply {code} now",
    "Get the latest ringtones FREE! Text {code} to {short}. {tail}",
    "Hot singles in your area want to chat! Reply {code} to {short}. {tail}",
    "You are a winner U have been specially selected 2 receive {prize} call {phone}",
    "Claim your {prize} today! Visit www.{site}.com or call {phone}. {tail}",
    "Important: you have an outstanding prize of {prize}. Call {phone} from a landline",
    "Double mins & txts on your mobile upgrade! Call {phone} FREE. {tail}",
    "SIX chances to win {prize}! Send {code} to {short} now. {tail}",
    "Your {brand} account has been suspended, verify at www.{site}.com {tail}",
    "Guaranteed {prize} or a 2nd prize! Call {phone} to claim. {tail}",
    "PRIVATE! Your statement shows 800 un-redeemed points. Call {phone}. {tail}",
    "Want {prize}? Just reply {code} and we'll text you back. {tail}",
    "hey its Jenny from the ad, txt me back on {short} for a chat {tail}",
]
# ham that borrows promotional vocabulary
HAM_HARD = [
    "Did u get the free tickets {name} won? Call me {time}",
    "I won £{amount} at the quiz lol, drinks on me at {place}",
    "Text me ur new number, mine is {phone}",
    "Claim ur seat at {place} early, it gets busy {time}",
    "Urgent - can u call me back? Need the {thing} {time}",
    "Free {food} at {place} {time} if u show ur student card",
    "Reply when u can, {name} wants to know about {time}",
    "Congrats on the new job!! {name} told me, so happy 4 u",
    "ur cash is on the table, {name} left £{amount} for {food}",
    "The prize draw at {place} is {time}, u coming?",
]
# spam written in a casual register
SPAM_SOFT = [
    "hi {name} its been a while! txt me back on {short} x {tail}",
    "Hey! u r invited to a private party {time}, reply {code} to {short}",
    "{name}, ur friend sent u a msg, call {phone} to listen",
    "sorry i missed ur call, ring me on {phone} {tail}",
    "Ur awarded a bonus, just reply {code}. see u {time}",
    "fancy meeting up {time}? text {code} to {short} to find out who likes u",
]
SITES = ["win-now", "claimprize", "freemob", "txt4cash", "getreward", "bonus-uk", "luckydraw"]
BRANDS = ["bank", "Paypal", "Amazon", "Netflix", "mobile"]

ABBREV = {"you": "u", "are": "r", "to": "2", "for": "4", "great": "gr8", "please": "pls",
          "tomorrow": "tmrw", "your": "ur", "text": "txt"}


def phone(rng):
    return "0" + rng.choice(["906", "870", "800", "871", "7"]) + "".join(rng.choice("0123456789") for _ in range(7))


def noisify(msg, rng, p_typo=0.03):
    words = msg.split(" ")
    out = []
    for w in words:
        lw = w.lower()
        if lw in ABBREV and rng.random() < 0.3:
            w = ABBREV[lw]
        if len(w) > 3 and rng.random() < p_typo:
            k = rng.randrange(len(w) - 1)
            w = w[:k] + w[k + 1] + w[k] + w[k + 2:]
        out.append(w)
    msg = " ".join(out)
    r = rng.random()
    if r < 0.1:
        msg = msg.lower()
    elif r < 0.15:
        msg = msg.upper()
    return msg


def ham(rng):
    if rng.random() < 0.12:
        msg = rng.choice(HAM_HARD).format(name=rng.choice(NAMES), place=rng.choice(PLACES), time=rng.choice(TIMES),
                                          food=rng.choice(FOODS), thing=rng.choice(THINGS), phone=phone(rng),
                                          amount=rng.choice(["5", "10", "20", "50", "100"]))
        return noisify(msg, rng)
    parts = [rng.choice(HAM)]
    if rng.random() < 0.35:
        parts.append(rng.choice(HAM))
    msg = " ".join(parts).format(name=rng.choice(NAMES), place=rng.choice(PLACES), time=rng.choice(TIMES),
                                 food=rng.choice(FOODS), thing=rng.choice(THINGS), feel=rng.choice(FEEL))
    if rng.random() < 0.2:
        msg += rng.choice([" x", " xx", " :)", " ;-)", " haha", " lol", "..."])
    return noisify(msg, rng)


def spam(rng):
    if rng.random() < 0.15:
        msg = rng.choice(SPAM_SOFT).format(name=rng.choice(NAMES), time=rng.choice(TIMES), phone=phone(rng),
                                           code=rng.choice(CODES), short=str(rng.randrange(10000, 90000)),
                                           tail=rng.choice(TAILS))
        return noisify(msg, rng)
    msg = rng.choice(SPAM).format(prize=rng.choice(PRIZES), phone=phone(rng), code=rng.choice(CODES),
                                  short=str(rng.randrange(10000, 90000)), tail=rng.choice(TAILS),
                                  site=rng.choice(SITES), brand=rng.choice(BRANDS))
    if rng.random() < 0.25:
        msg += " " + rng.choice(TAILS)
    return noisify(msg, rng, p_typo=0.02)


def main(path):
    rng = random.Random(SEED)
    rows = [("ham", ham(rng)) for _ in range(N_HAM)] + [("spam", spam(rng)) for _ in range(N_SPAM)]
    # a little label noise, as in hand-labelled collections
    rows = [(("spam" if lab == "ham" else "ham") if rng.random() < LABEL_NOISE else lab, text)
            for lab, text in rows]
    rng.shuffle(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for label, text in rows:
            fh.write(f"{label}\t{text}\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "sms_spam_fixture.tsv")
