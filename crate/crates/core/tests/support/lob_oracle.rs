//! Naive reference book used to check `apply_event` exhaustively on small states.

use fracvol::lob::{apply_event, BookState, LobEvent};

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBook {
    pub price: i64,
    pub w: i64,
    pub asks: Vec<(i64, f64)>,
    pub bids: Vec<(i64, f64)>,
    pub pend_buy: f64,
    pub pend_sell: f64,
}

impl NaiveBook {
    fn purge(&mut self) {
        let (lo, hi) = (self.price - self.w, self.price + self.w);
        self.asks.retain(|&(s, q)| s >= lo && s <= hi && q > 0.0);
        self.bids.retain(|&(s, q)| s >= lo && s <= hi && q > 0.0);
    }

    fn hit(&mut self, buy: bool) {
        let mut left = 1.0;
        loop {
            if left <= 0.0 {
                break;
            }
            let p = self.price;
            let side = if buy { &mut self.asks } else { &mut self.bids };
            let mut best: Option<usize> = None;
            for (i, &(s, _)) in side.iter().enumerate() {
                let better = match best {
                    None => true,
                    Some(j) => {
                        let (d, dj) = ((s - p).abs(), (side[j].0 - p).abs());
                        d < dj || (d == dj && if buy { s < side[j].0 } else { s > side[j].0 })
                    }
                };
                if better {
                    best = Some(i);
                }
            }
            let Some(i) = best else { break };
            let take = side[i].1.min(left);
            side[i].1 -= take;
            left -= take;
            self.price = side[i].0;
            self.purge();
        }
        if buy {
            self.pend_buy += left;
        } else {
            self.pend_sell += left;
        }
    }

    fn place(&mut self, ask: bool, slot: i64, size: f64) {
        let reg = if ask { self.pend_buy } else { self.pend_sell };
        let used = reg.min(size);
        if used > 0.0 {
            if ask {
                self.pend_buy -= used;
            } else {
                self.pend_sell -= used;
            }
            self.price = slot;
            self.purge();
        }
        if size - used > 0.0 {
            let side = if ask { &mut self.asks } else { &mut self.bids };
            match side.iter_mut().find(|(s, _)| *s == slot) {
                Some(e) => e.1 += size - used,
                None => side.push((slot, size - used)),
            }
        }
    }

    pub fn apply(&mut self, event: LobEvent, slot: Option<i64>, size: f64) {
        match event {
            LobEvent::LimitAsk => self.place(true, slot.unwrap(), size),
            LobEvent::LimitBid => self.place(false, slot.unwrap(), size),
            LobEvent::MarketBuy => self.hit(true),
            LobEvent::MarketSell => self.hit(false),
        }
    }

    pub fn to_book(&self) -> BookState {
        let mut b = BookState::empty(self.w as usize);
        b.price_slot = self.price;
        b.asks.extend(self.asks.iter().copied());
        b.bids.extend(self.bids.iter().copied());
        b.pending_buys = self.pend_buy;
        b.pending_sells = self.pend_sell;
        b
    }
}

/// Every event the book can receive from its current state.
fn choices(price: i64, w: i64) -> Vec<(LobEvent, Option<i64>)> {
    let mut v = vec![(LobEvent::MarketBuy, None), (LobEvent::MarketSell, None)];
    for s in price - w..=price + w {
        v.push((LobEvent::LimitAsk, Some(s)));
        v.push((LobEvent::LimitBid, Some(s)));
    }
    v
}

/// Starting states: up to three resting orders in a half-width-2 window and
/// registers in {0, 1}.
pub fn small_states() -> Vec<NaiveBook> {
    let w = 2i64;
    let orders: Vec<(bool, i64, f64)> =
        [true, false].iter().flat_map(|&a| (-w..=w).flat_map(move |s| [1.0, 2.0].map(|q| (a, s, q)))).collect();
    let mut combos: Vec<Vec<usize>> = vec![vec![]];
    for i in 0..orders.len() {
        combos.push(vec![i]);
        for j in i..orders.len() {
            combos.push(vec![i, j]);
            for k in j..orders.len() {
                combos.push(vec![i, j, k]);
            }
        }
    }
    let mut out = Vec::new();
    for c in combos {
        for (pb, ps) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            let mut b = NaiveBook { price: 0, w, asks: vec![], bids: vec![], pend_buy: pb, pend_sell: ps };
            for &i in &c {
                let (ask, s, q) = orders[i];
                let side = if ask { &mut b.asks } else { &mut b.bids };
                match side.iter_mut().find(|(x, _)| *x == s) {
                    Some(e) => e.1 += q,
                    None => side.push((s, q)),
                }
            }
            out.push(b);
        }
    }
    out
}

/// Run every two-event sequence from every small state through both books.
/// Returns the number of transitions checked and the first mismatch.
pub fn exhaustive_check() -> (usize, Option<String>) {
    let mut checked = 0;
    for start in small_states() {
        for size in [1.0, 2.0] {
            for (e1, s1) in choices(start.price, start.w) {
                let mut naive = start.clone();
                let mut book = start.to_book();
                naive.apply(e1, s1, size);
                apply_event(&mut book, e1, s1, size);
                checked += 1;
                if naive.to_book() != book {
                    return (checked, Some(format!("{start:?} then {e1:?} {s1:?} size {size}")));
                }
                for (e2, s2) in choices(naive.price, naive.w) {
                    let mut n2 = naive.clone();
                    let mut b2 = book.clone();
                    n2.apply(e2, s2, size);
                    apply_event(&mut b2, e2, s2, size);
                    checked += 1;
                    if n2.to_book() != b2 {
                        return (checked, Some(format!("{start:?} then {e1:?} {s1:?}, {e2:?} {s2:?} size {size}")));
                    }
                }
            }
        }
    }
    (checked, None)
}
