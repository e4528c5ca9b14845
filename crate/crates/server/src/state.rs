//! In-memory view of the data directory and the per-document writer.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use bizchat_core::corpus::Corpus;
use bizchat_core::gateway::{sha256_hex, Gateway};
use bizchat_core::ingest::PageSource;
use bizchat_core::model::{Clock, PlanDocument, RevisionEvent};
use bizchat_core::suggest::{ChatTurn, EditProposal};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::store::{DataDir, Log, StoreError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub account_id: String,
    pub display_name: String,
    pub api_token_hash: String,
}

/// What clients may see of an account.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccountView {
    pub account_id: String,
    pub display_name: String,
}

impl From<&Account> for AccountView {
    fn from(a: &Account) -> Self {
        AccountView { account_id: a.account_id.clone(), display_name: a.display_name.clone() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ChatRecord {
    Turn(ChatTurn),
    Proposal(EditProposal),
}

/// Model, retrieval and time dependencies of the service.
pub struct Services {
    pub gateway: Gateway,
    pub pages: PageSource,
    pub corpus: Corpus,
    pub clock: Arc<dyn Clock>,
    pub bootstrap_token: Option<String>,
    pub token_source: Box<dyn Fn() -> String + Send + Sync>,
}

pub fn random_token() -> String {
    hex::encode(rand::random::<[u8; 32]>())
}

pub struct Writer {
    events: Log,
    chat: Log,
}

/// A readable document. Readers clone the current `Arc`s; writers hold
/// `writer` across validate, append and publish.
pub struct LiveDoc {
    head: RwLock<Arc<PlanDocument>>,
    conversation: RwLock<Arc<Vec<ChatTurn>>>,
    proposals: RwLock<HashMap<String, EditProposal>>,
    writer: tokio::sync::Mutex<Writer>,
}

#[derive(Debug, thiserror::Error)]
pub enum CommitError<E> {
    #[error(transparent)]
    Rejected(E),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl LiveDoc {
    pub fn plan(&self) -> Arc<PlanDocument> {
        self.head.read().clone()
    }

    pub fn conversation(&self) -> Arc<Vec<ChatTurn>> {
        self.conversation.read().clone()
    }

    pub fn proposal(&self, id: &str) -> Option<EditProposal> {
        self.proposals.read().get(id).cloned()
    }

    /// Runs `change` against the head and durably appends the revisions it
    /// adds before publishing them.
    pub async fn commit<E>(
        &self,
        change: impl FnOnce(&PlanDocument) -> Result<PlanDocument, E>,
    ) -> Result<Arc<PlanDocument>, CommitError<E>> {
        let mut writer = self.writer.lock().await;
        let current = self.plan();
        let next = change(&current).map_err(CommitError::Rejected)?;
        let added: Vec<RevisionEvent> = next.history().split_off(current.revisions().len());
        writer.events.append(&added)?;
        let next = Arc::new(next);
        *self.head.write() = next.clone();
        Ok(next)
    }

    /// Appends chat turns (renumbered to follow the stored conversation)
    /// and the proposals they carried. Returns the new conversation.
    pub async fn record_exchange(
        &self,
        turns: Vec<ChatTurn>,
        proposals: &[EditProposal],
    ) -> Result<Arc<Vec<ChatTurn>>, StoreError> {
        let mut writer = self.writer.lock().await;
        let mut conversation = (*self.conversation()).clone();
        let mut records = Vec::new();
        for mut turn in turns {
            turn.turn_index = conversation.len() as u64;
            records.push(ChatRecord::Turn(turn.clone()));
            conversation.push(turn);
        }
        records.extend(proposals.iter().cloned().map(ChatRecord::Proposal));
        writer.chat.append(&records)?;
        {
            let mut stored = self.proposals.write();
            for p in proposals {
                stored.insert(p.proposal_id.clone(), p.clone());
            }
        }
        let conversation = Arc::new(conversation);
        *self.conversation.write() = conversation.clone();
        Ok(conversation)
    }
}

#[derive(Clone)]
pub enum DocSlot {
    Live(Arc<LiveDoc>),
    /// Unreadable on disk; served as an error, never rewritten.
    Corrupt(String),
}

pub struct AppState {
    pub gateway: Gateway,
    pub pages: PageSource,
    pub corpus: Corpus,
    pub clock: Arc<dyn Clock>,
    bootstrap_token: Option<String>,
    token_source: Box<dyn Fn() -> String + Send + Sync>,
    data: DataDir,
    accounts: RwLock<HashMap<String, Account>>,
    accounts_log: Mutex<Log>,
    docs: RwLock<BTreeMap<String, DocSlot>>,
    next_doc: AtomicU64,
}

fn sequence_number(id: &str, prefix: &str) -> Option<u64> {
    id.strip_prefix(prefix)?.parse().ok()
}

fn load_document(data: &DataDir, id: &str) -> Result<LiveDoc, String> {
    let (events_log, events) = Log::open::<RevisionEvent>(data.document(id)).map_err(|e| e.to_string())?;
    let (revisions, payloads): (Vec<_>, Vec<_>) = events.into_iter().map(|e| (e.revision, e.payload)).unzip();
    let plan = PlanDocument::replay(&revisions, &payloads).map_err(|e| format!("replay failed: {e}"))?;
    if plan.document_id() != id {
        return Err(format!("log holds document `{}`", plan.document_id()));
    }
    let (chat_log, records) = Log::open::<ChatRecord>(data.conversation(id)).map_err(|e| e.to_string())?;
    let mut turns = Vec::new();
    let mut proposals = HashMap::new();
    for record in records {
        match record {
            ChatRecord::Turn(t) => turns.push(t),
            ChatRecord::Proposal(p) => {
                proposals.insert(p.proposal_id.clone(), p);
            }
        }
    }
    Ok(LiveDoc {
        head: RwLock::new(Arc::new(plan)),
        conversation: RwLock::new(Arc::new(turns)),
        proposals: RwLock::new(proposals),
        writer: tokio::sync::Mutex::new(Writer { events: events_log, chat: chat_log }),
    })
}

impl AppState {
    /// Opens the data directory and replays everything in it. A document
    /// whose logs fail to read is kept as [`DocSlot::Corrupt`].
    pub fn open(data_dir: impl Into<std::path::PathBuf>, services: Services) -> Result<AppState, StoreError> {
        let data = DataDir::create(data_dir)?;
        let (accounts_log, accounts) = Log::open::<Account>(data.accounts())?;
        let mut docs = BTreeMap::new();
        let mut max_doc = 0;
        for id in data.document_ids()? {
            max_doc = max_doc.max(sequence_number(&id, "doc-").unwrap_or(0));
            let slot = match load_document(&data, &id) {
                Ok(doc) => DocSlot::Live(Arc::new(doc)),
                Err(reason) => {
                    tracing::error!(document = %id, %reason, "document is unreadable");
                    DocSlot::Corrupt(reason)
                }
            };
            docs.insert(id, slot);
        }
        Ok(AppState {
            gateway: services.gateway,
            pages: services.pages,
            corpus: services.corpus,
            clock: services.clock,
            bootstrap_token: services.bootstrap_token,
            token_source: services.token_source,
            data,
            accounts: RwLock::new(accounts.into_iter().map(|a| (a.api_token_hash.clone(), a)).collect()),
            accounts_log: Mutex::new(accounts_log),
            docs: RwLock::new(docs),
            next_doc: AtomicU64::new(max_doc + 1),
        })
    }

    pub fn bootstrap_matches(&self, presented: &str) -> bool {
        self.bootstrap_token.as_deref().is_some_and(|t| sha256_hex(t.as_bytes()) == sha256_hex(presented.as_bytes()))
    }

    /// Creates an account and returns it with its one-time visible token.
    pub fn issue_account(&self, display_name: &str) -> Result<(AccountView, String), StoreError> {
        let token = (self.token_source)();
        let mut log = self.accounts_log.lock();
        let mut accounts = self.accounts.write();
        let account = Account {
            account_id: format!("acct-{:06}", accounts.len() + 1),
            display_name: display_name.to_string(),
            api_token_hash: sha256_hex(token.as_bytes()),
        };
        log.append(std::slice::from_ref(&account))?;
        let view = AccountView::from(&account);
        accounts.insert(account.api_token_hash.clone(), account);
        Ok((view, token))
    }

    pub fn authenticate(&self, token: &str) -> Option<Account> {
        self.accounts.read().get(&sha256_hex(token.as_bytes())).cloned()
    }

    pub fn allocate_document_id(&self) -> String {
        format!("doc-{:06}", self.next_doc.fetch_add(1, Ordering::SeqCst))
    }

    /// Durably writes revision 0 and makes the document visible.
    pub fn create_document(&self, plan: PlanDocument) -> Result<Arc<LiveDoc>, StoreError> {
        let id = plan.document_id().to_string();
        let (mut events, _) = Log::open::<RevisionEvent>(self.data.document(&id))?;
        events.append(&plan.history())?;
        let (chat, _) = Log::open::<ChatRecord>(self.data.conversation(&id))?;
        let doc = Arc::new(LiveDoc {
            head: RwLock::new(Arc::new(plan)),
            conversation: RwLock::new(Arc::new(Vec::new())),
            proposals: RwLock::new(HashMap::new()),
            writer: tokio::sync::Mutex::new(Writer { events, chat }),
        });
        self.docs.write().insert(id, DocSlot::Live(doc.clone()));
        Ok(doc)
    }

    pub fn document(&self, id: &str) -> Option<DocSlot> {
        self.docs.read().get(id).cloned()
    }

    /// Live documents owned by `account_id`, in id order.
    pub fn documents_of(&self, account_id: &str) -> Vec<Arc<PlanDocument>> {
        self.docs
            .read()
            .values()
            .filter_map(|slot| match slot {
                DocSlot::Live(doc) => Some(doc.plan()),
                DocSlot::Corrupt(_) => None,
            })
            .filter(|plan| plan.owner() == account_id)
            .collect()
    }

    pub fn document_count(&self) -> usize {
        self.docs.read().len()
    }

    pub fn corrupt_documents(&self) -> Vec<String> {
        self.docs
            .read()
            .iter()
            .filter(|(_, slot)| matches!(slot, DocSlot::Corrupt(_)))
            .map(|(id, _)| id.clone())
            .collect()
    }
}
