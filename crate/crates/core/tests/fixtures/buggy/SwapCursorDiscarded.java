package org.example.feed;

import android.database.Cursor;
import android.support.v4.content.Loader;
import android.widget.SimpleCursorAdapter;

public class SwapCursorDiscarded {
    private SimpleCursorAdapter mAdapter;

    public void onLoadFinished(Loader<Cursor> loader, Cursor data) {
        mAdapter.swapCursor(data); // LEAK: swap_cursor
    }
}
