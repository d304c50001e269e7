use albench_bench::Pool;
use albench_core::classifiers::ClassifierSpec;

#[test]
fn bench_pool_is_a_valid_query_context() {
    let pool = Pool::xor(120, 20, ClassifierSpec::svm_rbf());
    let ctx = pool.context(5);
    ctx.validate().unwrap();
    assert_eq!(ctx.labeled.len() + ctx.unlabeled.len(), 120);
    assert_eq!(ctx.unlabeled_proba().unwrap().rows(), 100);
}
