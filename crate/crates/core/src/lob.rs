//! Random limit-order book on a moving window of price slots.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, lane, Rng};
use crate::sim::MarketPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LobEvent {
    LimitAsk,
    LimitBid,
    MarketBuy,
    MarketSell,
}

impl LobEvent {
    pub const ALL: [LobEvent; 4] = [LobEvent::LimitAsk, LobEvent::LimitBid, LobEvent::MarketBuy, LobEvent::MarketSell];

    pub fn name(&self) -> &'static str {
        match self {
            LobEvent::LimitAsk => "limit_ask",
            LobEvent::LimitBid => "limit_bid",
            LobEvent::MarketBuy => "market_buy",
            LobEvent::MarketSell => "market_sell",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookState {
    pub price_slot: i64,
    pub half_width: i64,
    pub asks: BTreeMap<i64, f64>,
    pub bids: BTreeMap<i64, f64>,
    pub pending_buys: f64,
    pub pending_sells: f64,
}

impl BookState {
    pub fn empty(half_width: usize) -> Self {
        Self {
            price_slot: 0,
            half_width: half_width as i64,
            asks: BTreeMap::new(),
            bids: BTreeMap::new(),
            pending_buys: 0.0,
            pending_sells: 0.0,
        }
    }

    pub fn window(&self) -> (i64, i64) {
        (self.price_slot - self.half_width, self.price_slot + self.half_width)
    }

    /// Resting orders inside the window, positive sizes, nonnegative registers.
    pub fn check(&self) -> Result<()> {
        let (lo, hi) = self.window();
        for (side, book) in [("ask", &self.asks), ("bid", &self.bids)] {
            for (&slot, &size) in book {
                if slot < lo || slot > hi {
                    return Err(Error::Domain(format!("{side} at slot {slot} outside window [{lo}, {hi}]")));
                }
                if !(size > 0.0) {
                    return Err(Error::Domain(format!("{side} at slot {slot} has size {size}")));
                }
            }
        }
        if self.pending_buys < 0.0 || self.pending_sells < 0.0 {
            return Err(Error::Domain("negative pending register".into()));
        }
        Ok(())
    }

    fn move_to(&mut self, slot: i64) {
        self.price_slot = slot;
        let (lo, hi) = self.window();
        self.asks.retain(|&s, _| s >= lo && s <= hi);
        self.bids.retain(|&s, _| s >= lo && s <= hi);
    }

    /// Closest non-empty slot to the price; ties go to the lower slot when
    /// `prefer_low`, otherwise to the higher one.
    fn closest(book: &BTreeMap<i64, f64>, price: i64, prefer_low: bool) -> Option<i64> {
        let below = book.range(..=price).next_back().map(|(&s, _)| s);
        let above = book.range(price..).next().map(|(&s, _)| s);
        match (below, above) {
            (Some(b), Some(a)) => {
                let (db, da) = (price - b, a - price);
                if db < da || (db == da && prefer_low) {
                    Some(b)
                } else {
                    Some(a)
                }
            }
            (b, a) => b.or(a),
        }
    }

    /// Fill a unit market order against `side`; the unfilled part goes to the register.
    fn market(&mut self, buy: bool) -> Option<i64> {
        let mut remaining: f64 = 1.0;
        let mut last = None;
        while remaining > 0.0 {
            let book = if buy { &mut self.asks } else { &mut self.bids };
            let Some(slot) = Self::closest(book, self.price_slot, buy) else { break };
            let size = book.get_mut(&slot).expect("slot present");
            let fill = remaining.min(*size);
            *size -= fill;
            remaining -= fill;
            if *size <= 0.0 {
                book.remove(&slot);
            }
            self.move_to(slot);
            last = Some(slot);
        }
        if remaining > 0.0 {
            if buy {
                self.pending_buys += remaining;
            } else {
                self.pending_sells += remaining;
            }
        }
        last
    }

    /// Rest `size` at `slot`, first filling any waiting opposite market orders.
    fn limit(&mut self, ask: bool, slot: i64, size: f64) {
        let register = if ask { &mut self.pending_buys } else { &mut self.pending_sells };
        let matched = register.min(size);
        let rest = size - matched;
        if matched > 0.0 {
            *register -= matched;
            self.move_to(slot);
        }
        if rest > 0.0 {
            let book = if ask { &mut self.asks } else { &mut self.bids };
            *book.entry(slot).or_insert(0.0) += rest;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobParams {
    pub half_width: usize,
    /// Size `n` of each limit order; market orders have size 1.
    pub order_size: f64,
    /// Probabilities of limit ask, limit bid, market buy, market sell.
    pub event_probs: [f64; 4],
    pub steps: usize,
    pub seed: u64,
    pub slot_size: f64,
    pub initial_price: f64,
    /// Asks only above the price and bids only below it.
    pub sides_only: bool,
    /// Steps discarded before recording; `None` means `10 (2w + 1)`.
    pub burn_in: Option<usize>,
}

impl Default for LobParams {
    fn default() -> Self {
        Self {
            half_width: 10,
            order_size: 2.0,
            event_probs: [0.25; 4],
            steps: 1 << 17,
            seed: 0,
            slot_size: 0.1,
            initial_price: 100.0,
            sides_only: false,
            burn_in: None,
        }
    }
}

impl LobParams {
    pub fn validate(&self) -> Result<()> {
        if self.half_width == 0 {
            return Err(Error::Config("half_width must be at least 1".into()));
        }
        if !(self.order_size > 0.0) {
            return Err(Error::Config(format!("order size {} must be positive", self.order_size)));
        }
        if self.event_probs.iter().any(|&p| !(p >= 0.0)) || (self.event_probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("event probabilities {:?} must sum to 1", self.event_probs)));
        }
        if !(self.slot_size > 0.0 && self.initial_price > 0.0) {
            return Err(Error::Config("slot size and initial price must be positive".into()));
        }
        if self.steps == 0 {
            return Err(Error::EmptyRequest("steps must be at least 1"));
        }
        Ok(())
    }

    pub fn burn_in_steps(&self) -> usize {
        self.burn_in.unwrap_or(10 * (2 * self.half_width + 1))
    }

    /// Volatility of a single tick move per `window` samples at the initial
    /// price, the resolution limit of the induced-volatility estimate.
    pub fn tick_vol_floor(&self, window: usize) -> f64 {
        (self.slot_size / self.initial_price) / (window as f64).sqrt()
    }

    fn draw_event(&self, rng: &mut Rng) -> LobEvent {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (e, &p) in LobEvent::ALL.iter().zip(&self.event_probs) {
            acc += p;
            if u < acc {
                return *e;
            }
        }
        LobEvent::ALL[self.event_probs.iter().rposition(|&p| p > 0.0).unwrap_or(3)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LobRecord {
    pub event: LobEvent,
    /// Placement slot of a limit order, or the last slot a market order hit.
    pub slot: Option<i64>,
    pub price_slot: i64,
}

/// Apply one event to the book.
pub fn apply_event(book: &mut BookState, event: LobEvent, slot: Option<i64>, size: f64) -> LobRecord {
    let slot = match event {
        LobEvent::LimitAsk => {
            let s = slot.expect("limit orders carry a slot");
            book.limit(true, s, size);
            Some(s)
        }
        LobEvent::LimitBid => {
            let s = slot.expect("limit orders carry a slot");
            book.limit(false, s, size);
            Some(s)
        }
        LobEvent::MarketBuy => book.market(true),
        LobEvent::MarketSell => book.market(false),
    };
    LobRecord { event, slot, price_slot: book.price_slot }
}

/// Draw one random event and apply it.
pub fn lob_step(book: &mut BookState, params: &LobParams, rng: &mut Rng) -> LobRecord {
    let event = params.draw_event(rng);
    let w = book.half_width;
    let p = book.price_slot;
    let slot = match (event, params.sides_only) {
        (LobEvent::LimitAsk, false) | (LobEvent::LimitBid, false) => Some(rng.random_range(p - w..=p + w)),
        (LobEvent::LimitAsk, true) => Some(rng.random_range(p + 1..=p + w)),
        (LobEvent::LimitBid, true) => Some(rng.random_range(p - w..=p - 1)),
        _ => None,
    };
    apply_event(book, event, slot, params.order_size)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobRun {
    /// Price per recorded step; log-volatility is not modelled and is NaN.
    pub path: MarketPath,
    /// Events of the recorded steps, when requested.
    pub trace: Option<Vec<LobRecord>>,
    pub final_book: BookState,
}

impl LobRun {
    pub fn slot_price(&self, params: &LobParams, slot: i64) -> f64 {
        params.initial_price + slot as f64 * params.slot_size
    }
}

/// Run the book from empty, discarding the burn-in.
pub fn run_lob(params: &LobParams, trace: bool) -> Result<LobRun> {
    params.validate()?;
    let mut book = BookState::empty(params.half_width);
    let mut rng = rng::substream(params.seed, 0, lane::BOOK);
    for _ in 0..params.burn_in_steps() {
        lob_step(&mut book, params, &mut rng);
    }
    let price_of = |slot: i64| params.initial_price + slot as f64 * params.slot_size;
    let mut prices = Vec::with_capacity(params.steps + 1);
    let mut events = trace.then(|| Vec::with_capacity(params.steps));
    prices.push(price_of(book.price_slot));
    for _ in 0..params.steps {
        let rec = lob_step(&mut book, params, &mut rng);
        let p = price_of(rec.price_slot);
        if !(p > 0.0) {
            return Err(Error::Domain(format!("price reached {p}; raise the initial price or shorten the run")));
        }
        prices.push(p);
        if let Some(ev) = events.as_mut() {
            ev.push(rec);
        }
    }
    let n = prices.len();
    let path =
        MarketPath { times: (0..n).map(|i| i as f64).collect(), prices, logvol: vec![f64::NAN; n], seed: params.seed };
    Ok(LobRun { path, trace: events, final_book: book })
}
