//! Behavioral feature extraction with online scaling.

mod engagement;
mod extract;
mod schema;
mod text;

pub use engagement::{detect_engagements, EngagementSummary, EngagementTracker, MIN_ENGAGEMENT_DEPTH};
pub use extract::{scale_feature_vector, FeatureAccumulator, FeatureExtractor, FeatureMatrix, FeatureVector};
pub use schema::{
    FeatureEntry, FeatureId, FeatureSchema, ScalingMode, DEFAULT_TOPICS, NUM_FEATURES, NUM_TOPICS, NUM_TOPIC_BUCKETS,
};
pub use text::{classify_intent, score_sentiment, token_overlap, tokenize, Intent, IntentRuleSet, SentimentLexicon};
