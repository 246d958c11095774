use std::collections::{HashMap, VecDeque};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{enrich_hyper_relation, key_seed, HyperKey, HyperParams, HyperRelation, HyperStatus};
use crate::scene::Catalog;
use crate::store::PriorStore;

pub type Job = Box<dyn FnOnce() + Send + 'static>;

/// Where background generation runs.
pub trait Executor: Send + Sync {
    fn spawn(&self, job: Job);
}

/// Runs jobs immediately on the calling thread.
#[derive(Debug, Default, Clone, Copy)]
pub struct InlineExecutor;

impl Executor for InlineExecutor {
    fn spawn(&self, job: Job) {
        job()
    }
}

/// Queues jobs until the owner runs them. Used to step background work in
/// tests.
#[derive(Default)]
pub struct ManualExecutor {
    queue: Mutex<VecDeque<Job>>,
}

impl ManualExecutor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self) -> usize {
        self.queue.lock().unwrap().len()
    }

    /// Runs the oldest queued job. Returns `false` when the queue was empty.
    pub fn run_next(&self) -> bool {
        let job = self.queue.lock().unwrap().pop_front();
        match job {
            Some(j) => {
                j();
                true
            }
            None => false,
        }
    }

    pub fn run_all(&self) -> usize {
        let mut n = 0;
        while self.run_next() {
            n += 1;
        }
        n
    }
}

impl Executor for ManualExecutor {
    fn spawn(&self, job: Job) {
        self.queue.lock().unwrap().push_back(job);
    }
}

/// Fixed-size worker pool fed by a channel. Dropping it waits for queued jobs.
pub struct ThreadPoolExecutor {
    sender: Mutex<Option<mpsc::Sender<Job>>>,
    workers: Vec<JoinHandle<()>>,
}

impl ThreadPoolExecutor {
    pub fn new(workers: usize) -> Self {
        let (tx, rx) = mpsc::channel::<Job>();
        let rx = Arc::new(Mutex::new(rx));
        let workers = (0..workers.max(1))
            .map(|i| {
                let rx = Arc::clone(&rx);
                std::thread::Builder::new()
                    .name(format!("hyper-worker-{i}"))
                    .spawn(move || loop {
                        let job = rx.lock().unwrap().recv();
                        match job {
                            Ok(j) => j(),
                            Err(_) => break,
                        }
                    })
                    .expect("spawn worker thread")
            })
            .collect();
        Self {
            sender: Mutex::new(Some(tx)),
            workers,
        }
    }

    /// One worker per available hardware thread.
    pub fn with_default_size() -> Self {
        Self::new(std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

impl Executor for ThreadPoolExecutor {
    fn spawn(&self, job: Job) {
        if let Some(tx) = self.sender.lock().unwrap().as_ref() {
            let _ = tx.send(job);
        }
    }
}

impl Drop for ThreadPoolExecutor {
    fn drop(&mut self) {
        self.sender.lock().unwrap().take();
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

#[derive(Debug, Clone)]
pub enum HyperResponse {
    Complete(Arc<HyperRelation>),
    Pending,
    Failed(String),
}

impl HyperResponse {
    pub fn status(&self) -> HyperStatus {
        match self {
            HyperResponse::Complete(_) => HyperStatus::Complete,
            HyperResponse::Pending => HyperStatus::Generating,
            HyperResponse::Failed(_) => HyperStatus::Failed,
        }
    }
}

#[derive(Debug, Clone)]
enum Flight {
    Generating,
    Failed(String),
}

/// Serves hyper-relations from the store and generates missing ones in the
/// background, at most one generation per key. Failures are remembered for
/// the life of the service.
pub struct HyperService {
    store: Arc<PriorStore>,
    executor: Arc<dyn Executor>,
    params: HyperParams,
    flights: Arc<Mutex<HashMap<HyperKey, Flight>>>,
}

impl HyperService {
    pub fn new(store: Arc<PriorStore>, executor: Arc<dyn Executor>, params: HyperParams) -> Self {
        Self {
            store,
            executor,
            params,
            flights: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn store(&self) -> &Arc<PriorStore> {
        &self.store
    }

    fn stored(&self, key: &HyperKey) -> Option<Arc<HyperRelation>> {
        match self.store.load_hyper(key) {
            Ok(r) => r,
            Err(e) => {
                tracing::warn!(key = %key, "ignoring unreadable hyper-relation: {e}");
                None
            }
        }
    }

    /// Returns the stored relation, or schedules generation and reports
    /// pending. Never waits for generation unless the executor runs jobs
    /// inline.
    pub fn request(&self, key: &HyperKey, catalog: &Catalog) -> HyperResponse {
        if let Some(r) = self.stored(key) {
            return HyperResponse::Complete(r);
        }
        {
            let mut flights = self.flights.lock().unwrap();
            match flights.get(key) {
                Some(Flight::Generating) => return HyperResponse::Pending,
                Some(Flight::Failed(why)) => return HyperResponse::Failed(why.clone()),
                None => {}
            }
            // A job may have finished between the first check and the lock.
            if let Some(r) = self.stored(key) {
                return HyperResponse::Complete(r);
            }
            flights.insert(key.clone(), Flight::Generating);
        }
        self.executor.spawn(self.job(key.clone(), catalog.clone()));
        if let Some(Flight::Failed(why)) = self.flights.lock().unwrap().get(key) {
            return HyperResponse::Failed(why.clone());
        }
        match self.stored(key) {
            Some(r) => HyperResponse::Complete(r),
            None => HyperResponse::Pending,
        }
    }

    /// Forgets a remembered failure so the next request retries.
    pub fn forget_failure(&self, key: &HyperKey) {
        let mut f = self.flights.lock().unwrap();
        if matches!(f.get(key), Some(Flight::Failed(_))) {
            f.remove(key);
        }
    }

    /// Number of keys with a generation job scheduled or running.
    pub fn in_flight(&self) -> usize {
        self.flights
            .lock()
            .unwrap()
            .values()
            .filter(|f| matches!(f, Flight::Generating))
            .count()
    }

    fn job(&self, key: HyperKey, catalog: Catalog) -> Job {
        let store = Arc::clone(&self.store);
        let flights = Arc::clone(&self.flights);
        let params = self.params;
        Box::new(move || {
            let mut rng = ChaCha8Rng::seed_from_u64(key_seed(&key));
            let rel = enrich_hyper_relation(&key, &store, &catalog, &mut rng, &params);
            let outcome = match rel.status {
                HyperStatus::Complete => store.save_hyper(&rel).map_err(|e| e.to_string()),
                _ => Err(rel.reason.clone().unwrap_or_else(|| "generation failed".into())),
            };
            let mut f = flights.lock().unwrap();
            match outcome {
                Ok(()) => {
                    f.remove(&key);
                }
                Err(why) => {
                    tracing::info!(key = %key, "hyper-relation generation failed: {why}");
                    f.insert(key, Flight::Failed(why));
                }
            }
        })
    }
}
