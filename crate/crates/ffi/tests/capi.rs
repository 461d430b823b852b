use std::ffi::{CStr, CString};
use std::ptr;

use levqe_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = lq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

unsafe fn tags_string(t: *const LqTags) -> String {
    let p = lq_tags_to_string(t);
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    lq_string_free(p);
    s
}

#[test]
fn edit_cost_and_ter() {
    let mut cost = 0usize;
    let mut ter = 0.0f64;
    unsafe {
        let (h, r) = (c("a b c d"), c("c d a b"));
        assert_eq!(lq_edit_cost(h.as_ptr(), r.as_ptr(), false, &mut cost), LqStatus::Ok);
        assert_eq!(cost, 4);
        assert_eq!(lq_edit_cost(h.as_ptr(), r.as_ptr(), true, &mut cost), LqStatus::Ok);
        assert_eq!(cost, 1);
        assert_eq!(lq_ter(h.as_ptr(), r.as_ptr(), &mut ter), LqStatus::Ok);
        assert_eq!(ter, 0.25);
        let empty = c("");
        assert_eq!(lq_ter(h.as_ptr(), empty.as_ptr(), &mut ter), LqStatus::Data);
        assert!(last_error().contains("TER"));
        assert_eq!(lq_ter(ptr::null(), r.as_ptr(), &mut ter), LqStatus::InvalidArgument);
        assert!(last_error().contains("hyp"));
    }
}

#[test]
fn tags_lifecycle() {
    unsafe {
        let mut t: *mut LqTags = ptr::null_mut();
        let (mt, pe) = (c("a b"), c("a c"));
        assert_eq!(lq_tags_from_pair(mt.as_ptr(), pe.as_ptr(), &mut t), LqStatus::Ok);
        assert_eq!(lq_tags_token_count(t), 2);
        assert_eq!(tags_string(t), "OK OK OK BAD OK");
        let mut bad = false;
        assert_eq!(lq_tags_get(t, 3, &mut bad), LqStatus::Ok);
        assert!(bad);
        assert_eq!(lq_tags_get(t, 5, &mut bad), LqStatus::InvalidArgument);
        lq_tags_free(t);

        let mut p: *mut LqTags = ptr::null_mut();
        let even = c("OK BAD");
        assert_eq!(lq_tags_parse(even.as_ptr(), &mut p), LqStatus::Data);
        assert!(p.is_null());
        lq_tags_free(ptr::null_mut());
    }
}

#[test]
fn subword_round_trip() {
    unsafe {
        let tokens = c("a@@ b c");
        let (mut naive, mut word, mut sw, mut back) =
            (ptr::null_mut(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut());
        assert_eq!(
            lq_tags_parse(c("OK BAD OK OK OK OK OK").as_ptr(), &mut naive),
            LqStatus::Ok
        );
        assert_eq!(lq_tags_parse(c("OK BAD OK OK BAD").as_ptr(), &mut word), LqStatus::Ok);
        assert_eq!(
            lq_heuristic_subword(tokens.as_ptr(), ptr::null(), naive, word, &mut sw),
            LqStatus::Ok
        );
        assert_eq!(tags_string(sw), "OK BAD OK OK OK OK BAD");
        assert_eq!(
            lq_subword_to_word(tokens.as_ptr(), ptr::null(), sw, &mut back),
            LqStatus::Ok
        );
        assert_eq!(tags_string(back), tags_string(word));
        let dangling = c("a@@");
        let mut none = ptr::null_mut();
        assert_eq!(
            lq_subword_to_word(dangling.as_ptr(), ptr::null(), sw, &mut none),
            LqStatus::Data
        );
        for t in [naive, word, sw, back] {
            lq_tags_free(t);
        }
    }
}

#[test]
fn evaluator_pools_sentences() {
    unsafe {
        let ev = lq_evaluator_new(LqScope::All);
        let mut m = LqMetrics::default();
        assert_eq!(lq_evaluator_metrics(ev, &mut m), LqStatus::Data);
        for (p, g) in [("OK BAD OK", "OK BAD OK"), ("BAD OK OK BAD OK", "OK OK OK BAD OK")] {
            let (mut pt, mut gt) = (ptr::null_mut(), ptr::null_mut());
            lq_tags_parse(c(p).as_ptr(), &mut pt);
            lq_tags_parse(c(g).as_ptr(), &mut gt);
            assert_eq!(lq_evaluator_add(ev, pt, gt), LqStatus::Ok);
            lq_tags_free(pt);
            lq_tags_free(gt);
        }
        assert_eq!(lq_evaluator_metrics(ev, &mut m), LqStatus::Ok);
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (2, 1, 5, 0));
        let mut direct = 0.0;
        assert_eq!(lq_mcc(2, 1, 5, 0, &mut direct), LqStatus::Ok);
        assert_eq!(m.mcc, direct);
        lq_evaluator_free(ev);
        assert_eq!(lq_mcc(0, 0, 0, 0, &mut direct), LqStatus::Data);
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(lq_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
